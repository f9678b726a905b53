"""Finite-dimensional approximation classes on a grid, with randomized
structural probes.

A subspace is held as basis values at the grid nodes.  The structural
notions probed here are necessarily grid-scale surrogates: zero counting
sees nodes, not the continuum, so "pass" verdicts from randomized probes
are inconclusive-positive, while every "fail" carries a witness that can
be re-checked by direct evaluation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grids import Grid, GridFunction

__all__ = [
    "Subspace",
    "ProbeWitness",
    "ProbeVerdict",
    "StructureReport",
    "make_monomial_subspace",
    "make_hat_subspace",
    "make_subspace",
    "subspace_from_csv",
    "evaluate",
    "count_sign_changes",
    "tchebycheff_probe",
    "one_space_witness",
]

_GRAM_RTOL = 1e-10


class Subspace:
    """Span of basis functions given by their node values.

    The weighted Gram matrix must be numerically nonsingular (smallest
    singular value above 1e-10 of the largest), which rules out dependent
    or indistinguishable-on-this-grid bases at construction time.
    """

    def __init__(self, grid: Grid, basis_values, labels: Optional[Sequence[str]] = None):
        basis = np.asarray(basis_values, dtype=float)
        if basis.ndim != 2 or basis.shape[1] != grid.n_nodes:
            raise ValueError("basis must be (n_basis, n_nodes)")
        if basis.shape[0] < 1:
            raise ValueError("subspace needs at least one basis element")
        if not np.all(np.isfinite(basis)):
            raise ValueError("basis values must be finite")
        if labels is None:
            labels = [f"b{i}" for i in range(basis.shape[0])]
        if len(labels) != basis.shape[0]:
            raise ValueError("one label per basis element")
        gram = (basis * grid.weights) @ basis.T
        svals = np.linalg.svd(gram, compute_uv=False)
        if svals[-1] <= _GRAM_RTOL * svals[0]:
            raise ValueError(
                "basis is numerically dependent on this grid "
                f"(singular value ratio {svals[-1] / svals[0]:.2e})"
            )
        basis.flags.writeable = False
        self.grid = grid
        self.basis = basis
        self.labels = list(labels)
        self.gram = gram
        self.weighted_basis = basis * grid.weights  # cached for inner products
        self.weighted_basis.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def element(self, coeffs) -> GridFunction:
        return evaluate(coeffs, self)

    def basis_function(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.basis[i])


def make_monomial_subspace(grid: Grid, n: int) -> Subspace:
    """1, x, ..., x**(n-1) sampled at the nodes."""
    if n < 1:
        raise ValueError("need n >= 1")
    if n > grid.n_nodes:
        raise ValueError("more basis elements than grid nodes")
    basis = grid.nodes[None, :] ** np.arange(n)[:, None]
    labels = ["1"] + [f"x^{j}" if j > 1 else "x" for j in range(1, n)]
    return Subspace(grid, basis, labels)


def make_hat_subspace(grid: Grid, knots: Sequence[float]) -> Subspace:
    """Clamped piecewise-linear hats: one per knot, summing to 1 on [a, b].

    Hat i is 1 at its knot, falls linearly to 0 at the neighbouring knots,
    and is extended constant beyond the outermost knots, so the sum of the
    basis is identically 1, so a strictly positive element always exists.
    """
    knots = [float(k) for k in knots]
    if not knots:
        raise ValueError("need at least one knot")
    if any(b <= a for a, b in zip(knots, knots[1:])):
        raise ValueError("knots must be strictly increasing")
    if knots[0] < grid.a or knots[-1] > grid.b:
        raise ValueError("knots must lie inside [a, b]")
    rows = []
    for i, k in enumerate(knots):
        xp = [k]
        fp = [1.0]
        if i > 0:
            xp = [knots[i - 1]] + xp
            fp = [0.0] + fp
        if i < len(knots) - 1:
            xp = xp + [knots[i + 1]]
            fp = fp + [0.0]
        rows.append(np.interp(grid.nodes, xp, fp))
    labels = [f"hat@{k:g}" for k in knots]
    return Subspace(grid, np.array(rows), labels)


def make_subspace(grid: Grid, columns, labels: Optional[Sequence[str]] = None) -> Subspace:
    """Subspace from explicit basis value rows (one row per element)."""
    return Subspace(grid, columns, labels)


def subspace_from_csv(grid: Grid, path) -> Subspace:
    """Load a basis from CSV: first column node coordinates, one further
    column per basis element; an optional non-numeric first row names them."""
    rows = []
    labels = None
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if labels is None and not rows:
                    labels = [v.strip() for v in row[1:]]
                else:
                    raise
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("basis CSV needs a node column plus basis columns")
    if data.shape[0] != grid.n_nodes:
        raise ValueError(
            f"basis CSV has {data.shape[0]} rows but the grid has {grid.n_nodes} nodes"
        )
    scale = 1.0 + abs(grid.a) + abs(grid.b)
    if np.max(np.abs(data[:, 0] - grid.nodes)) > 1e-9 * scale:
        raise ValueError("basis CSV nodes do not match the grid nodes")
    return Subspace(grid, data[:, 1:].T, labels)


def evaluate(coeffs, s: Subspace) -> GridFunction:
    """Linear combination of the basis, as a grid function."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (s.dim,):
        raise ValueError(f"expected {s.dim} coefficients, got {coeffs.shape}")
    return GridFunction(s.grid, coeffs @ s.basis)


def count_sign_changes(values, tol: float) -> int:
    """Sign changes across a node sequence with near-zero entries collapsed.

    Entries with |v| <= tol are dropped before counting, so a run of
    near-zeros separating opposite signs counts as a single change.
    """
    v = np.asarray(values, dtype=float)
    v = v[np.abs(v) > tol]
    if v.size < 2:
        return 0
    s = np.sign(v)
    return int(np.count_nonzero(s[1:] != s[:-1]))


@dataclass(frozen=True)
class ProbeWitness:
    """Coefficients that exhibit the reported violation, plus the statistic
    (sign-change count or equality-set measure) observed for them."""

    coeffs: np.ndarray
    statistic: float


@dataclass(frozen=True)
class ProbeVerdict:
    status: str  # "pass" | "fail" | "inconclusive"
    witness: Optional[ProbeWitness] = None

    def __post_init__(self):
        if self.status not in ("pass", "fail", "inconclusive"):
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == "fail" and self.witness is None:
            raise ValueError("a fail verdict must carry a witness")


@dataclass(frozen=True)
class StructureReport:
    tchebycheff_verdict: ProbeVerdict
    one_space_witness: Optional[np.ndarray]
    zero_space_verdict: ProbeVerdict
    trials: int


def tchebycheff_probe(s: Subspace, trials: int, rng_seed: int = 0) -> StructureReport:
    """Randomized structural probe of a subspace.

    Draws random elements and counts their sign changes at grid scale: any
    nonzero element with >= dim changes disproves the zero bound of a
    Tchebycheff space and is returned as a witness.  The same trial loop
    checks random pairs for large equality sets (the 0-space condition).
    A "pass" is probabilistic; a "fail" witness is re-checkable.
    """
    if trials < 1:
        raise ValueError("need trials >= 1")
    rng = np.random.default_rng(rng_seed)
    eta = s.grid.equality_tol
    n = s.dim
    tcheb = ProbeVerdict("pass")
    zero_space = ProbeVerdict("pass")
    zero_measure_tol = 10.0 * eta * (s.grid.b - s.grid.a)
    degenerate = False
    for _ in range(trials):
        c = rng.standard_normal(n)
        c /= np.linalg.norm(c)
        vals = c @ s.basis
        if np.all(np.abs(vals) <= eta):
            degenerate = True
            continue
        if tcheb.status == "pass":
            changes = count_sign_changes(vals, eta)
            if changes >= n:
                tcheb = ProbeVerdict("fail", ProbeWitness(c.copy(), float(changes)))
        if zero_space.status == "pass":
            d = rng.standard_normal(n)
            diff = c - d / np.linalg.norm(d)
            dvals = diff @ s.basis
            eq_measure = float(s.grid.weights[np.abs(dvals) <= eta].sum())
            if np.linalg.norm(diff) > eta and eq_measure > zero_measure_tol:
                zero_space = ProbeVerdict("fail", ProbeWitness(diff.copy(), eq_measure))
    if degenerate:
        if tcheb.status == "pass":
            tcheb = ProbeVerdict("inconclusive")
        if zero_space.status == "pass":
            zero_space = ProbeVerdict("inconclusive")
    return StructureReport(
        tchebycheff_verdict=tcheb,
        one_space_witness=one_space_witness(s),
        zero_space_verdict=zero_space,
        trials=trials,
    )


def one_space_witness(
    s: Subspace, iterations: int = 60, rng_seed: int = 0
) -> Optional[np.ndarray]:
    """Search for an element that is positive at every node.

    Maximizes the minimum node value over unit-norm coefficients by
    multi-start coordinate ascent with a shrinking step.  Returns the
    coefficients when the maximin is positive, else None.  Nodes are all a
    grid can see: positivity on the continuum does not follow.
    """
    n = s.dim
    rng = np.random.default_rng(rng_seed)
    starts = [np.ones(n)]
    starts.extend(np.eye(n))
    starts.extend(rng.standard_normal(n) for _ in range(4))

    def maximin(c):
        nrm = np.linalg.norm(c)
        if nrm == 0:
            return -np.inf, c
        c = c / nrm
        return float(np.min(c @ s.basis)), c

    best_val, best_c = -np.inf, None
    for start in starts:
        val, c = maximin(start)
        step = 0.5
        for _ in range(iterations):
            improved = False
            for j in range(n):
                for delta in (step, -step):
                    trial = c.copy()
                    trial[j] += delta
                    tval, tc = maximin(trial)
                    if tval > val + 1e-15:
                        val, c = tval, tc
                        improved = True
            if not improved:
                step *= 0.5
                if step < 1e-9:
                    break
        if val > best_val:
            best_val, best_c = val, c
    if best_val > 0.0:
        return best_c
    return None
