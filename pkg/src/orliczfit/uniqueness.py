"""Empirical uniqueness experiments and the non-uniqueness witness family.

Uniqueness of a best approximation is probed, not proved: many seeded
solver starts are clustered by coefficient distance, a single cluster
reads as a singleton, and several clusters count as genuine multiplicity
only when every cluster representative independently passes the
optimality certificate.  Ambiguous clusterings (clusters closer than ten
times the largest cluster radius) and non-converged starts yield an
inconclusive verdict rather than a claim.

The witness builder realizes the non-uniqueness construction available
when Phi is affine with slope k near zero: given a candidate pair (f, p1)
and an element p3 vanishing wherever the residual does, with |p3| at most
half the affine width and the residual inside it, the function
h = |p3| * sgn(f - p1) has every eps*p3 with 0 < eps < 1 as good as 0.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .certificates import check_characterization
from .grids import Grid, GridFunction, measure, modular, NodeSet
from .phi import PhiFunction, find_affine_segments
from .solver import BestApproxSolution, SolverConfig, refine_solution, solve_all_starts
from .subspaces import Subspace, count_sign_changes, evaluate, one_space_witness

__all__ = [
    "SolutionCluster",
    "UniquenessVerdict",
    "UniquenessReport",
    "NonUniqWitness",
    "WitnessPreconditionError",
    "uniqueness_probe",
    "residual_sign_changes",
    "build_nonuniq_witness",
    "condition_b_check",
    "jump_phi_uniqueness_suite",
    "random_smooth_function",
]


@dataclass(frozen=True)
class SolutionCluster:
    representative: np.ndarray
    modular_value: float
    radius: float
    member_count: int
    member_start_ids: tuple[int, ...]


@dataclass(frozen=True)
class UniquenessVerdict:
    kind: str  # "singleton" | "multiple" | "inconclusive"
    diameter: Optional[float] = None
    reason: str = ""

    def __post_init__(self):
        if self.kind not in ("singleton", "multiple", "inconclusive"):
            raise ValueError(f"unknown verdict kind {self.kind!r}")


@dataclass(frozen=True)
class UniquenessReport:
    instance: str
    clusters: list[SolutionCluster]
    verdict: UniquenessVerdict
    theorem_tag: str = ""

    def to_json_dict(self) -> dict:
        return {
            "instance": self.instance,
            "theorem_tag": self.theorem_tag,
            "verdict": self.verdict.kind,
            "diameter": self.verdict.diameter,
            "reason": self.verdict.reason,
            "clusters": [
                {
                    "representative": [float(v) for v in c.representative],
                    "modular_value": c.modular_value,
                    "radius": c.radius,
                    "member_count": c.member_count,
                    "member_start_ids": list(c.member_start_ids),
                }
                for c in self.clusters
            ],
        }


def _cluster_solutions(
    solutions: Sequence[BestApproxSolution], threshold: float
) -> list[SolutionCluster]:
    """Single-linkage clustering of solution coefficients (union-find)."""
    n = len(solutions)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    coeffs = [sol.coeffs for sol in solutions]
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(coeffs[i] - coeffs[j]) <= threshold:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    clusters = []
    for members in groups.values():
        rep_idx = min(members, key=lambda i: (solutions[i].modular_value, solutions[i].start_id))
        rep = solutions[rep_idx].coeffs
        radius = max(float(np.linalg.norm(solutions[i].coeffs - rep)) for i in members)
        clusters.append(
            SolutionCluster(
                representative=rep.copy(),
                modular_value=solutions[rep_idx].modular_value,
                radius=radius,
                member_count=len(members),
                member_start_ids=tuple(sorted(solutions[i].start_id for i in members)),
            )
        )
    clusters.sort(key=lambda c: tuple(c.representative))
    return clusters


def _consolidate(f, s, phi, cfg, solutions, passes: int = 2):
    """Pull stragglers down before clustering.

    A start whose value exceeds the best over all starts by more than the
    objective tolerance has visibly not finished: re-refine it from its
    own point, seeding the refinement with the known gap.  Points on a
    genuinely flat optimal set have equal values and are never touched,
    so multiplicity detection is unaffected.
    """
    for _ in range(passes):
        best = min(solutions, key=lambda sol: (sol.modular_value, sol.start_id))
        margin = 10.0 * cfg.tol_obj * (1.0 + abs(best.modular_value))
        if not any(sol.modular_value - best.modular_value > margin for sol in solutions):
            break
        refined = []
        for sol in solutions:
            gap = sol.modular_value - best.modular_value
            if gap > margin:
                better = refine_solution(
                    f,
                    s,
                    phi,
                    cfg,
                    sol.coeffs,
                    gap_hint=10.0 * gap,
                    toward=best.coeffs,
                    start_id=sol.start_id,
                )
                if better.modular_value < sol.modular_value:
                    sol = better
            refined.append(sol)
        solutions = refined
    return solutions


def uniqueness_probe(
    f: GridFunction,
    s: Subspace,
    phi: PhiFunction,
    cfg: Optional[SolverConfig] = None,
    n_starts: Optional[int] = None,
    instance: str = "",
    theorem_tag: str = "",
    certify_tol: Optional[float] = None,
) -> UniquenessReport:
    """Multi-start detection of whether the best approximation is unique.

    Clustering threshold is 1e3 * tol_coeff.  A "multiple" verdict is
    claimed only when the clusters are well separated and every cluster
    representative passes the optimality certificate at certify_tol
    (default 1e-4 * (1 + modular value)); anything weaker is inconclusive.
    """
    cfg = cfg or SolverConfig()
    if n_starts is not None:
        cfg = dataclasses.replace(cfg, n_starts=n_starts)
    solutions = solve_all_starts(f, s, phi, cfg)
    solutions = _consolidate(f, s, phi, cfg, solutions)
    clusters = _cluster_solutions(solutions, threshold=1e3 * cfg.tol_coeff)
    if any(not sol.converged for sol in solutions):
        verdict = UniquenessVerdict("inconclusive", reason="non-converged starts")
        return UniquenessReport(instance, clusters, verdict, theorem_tag)
    if len(clusters) == 1:
        verdict = UniquenessVerdict("singleton", diameter=clusters[0].radius)
        return UniquenessReport(instance, clusters, verdict, theorem_tag)

    max_radius = max(c.radius for c in clusters)
    min_separation = min(
        float(np.linalg.norm(a.representative - b.representative))
        for i, a in enumerate(clusters)
        for b in clusters[i + 1 :]
    )
    if min_separation <= 10.0 * max_radius:
        verdict = UniquenessVerdict("inconclusive", reason="ambiguous clustering")
        return UniquenessReport(instance, clusters, verdict, theorem_tag)
    for cluster in clusters:
        p = evaluate(cluster.representative, s)
        tol = certify_tol
        if tol is None:
            tol = 1e-4 * (1.0 + cluster.modular_value)
        cert = check_characterization(f, p, s, phi, tol)
        if not cert.verdict:
            verdict = UniquenessVerdict(
                "inconclusive", reason="uncertified cluster representative"
            )
            return UniquenessReport(instance, clusters, verdict, theorem_tag)
    diameter = max(
        float(np.linalg.norm(a.representative - b.representative))
        for i, a in enumerate(clusters)
        for b in clusters[i + 1 :]
    )
    verdict = UniquenessVerdict("multiple", diameter=diameter)
    return UniquenessReport(instance, clusters, verdict, theorem_tag)


def residual_sign_changes(f: GridFunction, p: GridFunction) -> int:
    """Sign changes of f - p across the nodes, near-zeros collapsed."""
    f.grid.require_same(p.grid)
    return count_sign_changes(f.values - p.values, f.grid.equality_tol)


class WitnessPreconditionError(ValueError):
    """A bound required by the witness construction fails; names the bound."""


@dataclass(frozen=True)
class NonUniqWitness:
    p3: np.ndarray
    h: GridFunction
    epsilons: tuple[float, ...]
    modular_gap: float

    def to_json_dict(self) -> dict:
        return {
            "p3_coeffs": [float(v) for v in self.p3],
            "epsilons": list(self.epsilons),
            "modular_gap": self.modular_gap,
        }


def _affine_head(phi: PhiFunction):
    for seg in find_affine_segments(phi):
        if seg.lo == 0.0:
            return seg
    return None


def build_nonuniq_witness(
    s: Subspace,
    phi: PhiFunction,
    p3_coeffs,
    f: GridFunction,
    p1: GridFunction,
    epsilons: Iterable[float] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
) -> NonUniqWitness:
    """Assemble the non-uniqueness witness h = |p3| * sgn(f - p1).

    Preconditions checked (each failure names its bound): Phi affine on
    [0, c]; sup|p3| <= c/2 with p3 not identically zero; sup|f - p1| <= c;
    every near-zero of the residual is a near-zero of p3.  The builder
    does not verify that p1 is optimal for f; certify that separately,
    the modular gap over the epsilons is what the caller inspects.
    """
    f.grid.require_same(p1.grid)
    f.grid.require_same(s.grid)
    epsilons = tuple(float(e) for e in epsilons)
    if any(not 0.0 < e < 1.0 for e in epsilons):
        raise WitnessPreconditionError("epsilons must lie strictly between 0 and 1")
    head = _affine_head(phi)
    if head is None:
        raise WitnessPreconditionError(
            "Phi has no affine segment starting at 0 (generator not constant near 0)"
        )
    c = head.hi
    eta = f.grid.equality_tol
    p3 = evaluate(p3_coeffs, s)
    p3_sup = p3.sup_norm()
    slack = 1e-12 * (1.0 + abs(c if np.isfinite(c) else 0.0))
    if p3_sup <= eta:
        raise WitnessPreconditionError("p3 must not vanish identically")
    if np.isfinite(c) and p3_sup > c / 2.0 + slack:
        raise WitnessPreconditionError(
            f"sup|p3| = {p3_sup:.6g} exceeds c/2 = {c / 2.0:.6g}"
        )
    r = f.values - p1.values
    r_sup = float(np.max(np.abs(r)))
    if np.isfinite(c) and r_sup > c + slack:
        raise WitnessPreconditionError(
            f"sup|f - p1| = {r_sup:.6g} exceeds c = {c:.6g}"
        )
    res_zero = np.abs(r) <= eta
    if np.any(res_zero & (np.abs(p3.values) > eta)):
        raise WitnessPreconditionError(
            "the near-zero set of f - p1 is not contained in the near-zero set of p3"
        )
    sgn = np.where(r > eta, 1.0, np.where(r < -eta, -1.0, 0.0))
    h = GridFunction(f.grid, np.abs(p3.values) * sgn)
    base = modular(phi, h)
    gap = 0.0
    p3_arr = np.asarray(p3_coeffs, dtype=float)
    for eps in epsilons:
        value = modular(phi, h - evaluate(eps * p3_arr, s))
        gap = max(gap, abs(value - base))
    return NonUniqWitness(p3=p3_arr.copy(), h=h, epsilons=epsilons, modular_gap=gap)


def condition_b_check(
    f: GridFunction,
    p1: GridFunction,
    phi: PhiFunction,
    grid: Optional[Grid] = None,
) -> bool:
    """Whether the residual exceeds the affine width c on a set of positive
    measure (measured against the usual 10*eta*(b-a) floor)."""
    f.grid.require_same(p1.grid)
    grid = grid or f.grid
    f.grid.require_same(grid)
    head = _affine_head(phi)
    if head is None:
        raise ValueError("Phi has no affine segment starting at 0")
    c = head.hi
    if not np.isfinite(c):
        return False
    exceed = NodeSet(grid, np.abs(f.values - p1.values) > c)
    return measure(grid, exceed) > 10.0 * grid.equality_tol * (grid.b - grid.a)


def random_smooth_function(grid: Grid, rng: np.random.Generator) -> GridFunction:
    """Random smooth target: low-order polynomial plus decaying sine terms."""
    u = (grid.nodes - grid.a) / (grid.b - grid.a)
    coeffs = rng.standard_normal(3)
    values = coeffs[0] + coeffs[1] * u + 0.5 * coeffs[2] * u * u
    for j in range(1, 4):
        amp = rng.standard_normal() / j
        phase = rng.uniform(0.0, 2.0 * np.pi)
        values = values + amp * np.sin(j * np.pi * u + phase)
    return GridFunction(grid, values)


def jump_phi_uniqueness_suite(
    s: Subspace,
    phi: PhiFunction,
    n_instances: int,
    rng_seed: int,
    cfg: Optional[SolverConfig] = None,
    n_starts: int = 16,
    instances: Optional[Sequence[GridFunction]] = None,
    theorem_tag: str = "jump-generator-singleton",
) -> list[UniquenessReport]:
    """Uniqueness probes over random continuous targets for a 1-space.

    The interesting generators here are staircase ones (jumps accumulating
    toward 0), whose modulars pin the minimizer to a vertex; running the
    same suite with a jump-free generator is the natural control.  The
    subspace must expose a positive element or the suite is rejected.
    """
    if one_space_witness(s) is None:
        raise ValueError("subspace has no positive-element witness; not a 1-space probe")
    if n_instances < 0:
        raise ValueError("n_instances must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    cfg = cfg or SolverConfig()
    reports = []
    if instances is None:
        instances = [random_smooth_function(s.grid, rng) for _ in range(n_instances)]
    else:
        instances = list(instances)[: n_instances or len(instances)]
    for i, f in enumerate(instances):
        reports.append(
            uniqueness_probe(
                f,
                s,
                phi,
                cfg=cfg,
                n_starts=n_starts,
                instance=f"suite[{i}]",
                theorem_tag=theorem_tag,
            )
        )
    return reports
