"""Minimization of the modular over coefficient vectors.

The objective F(c) = sum_i w_i * Phi(|f(x_i) - sum_j c_j d_j(x_i)|) is
convex but in general nonsmooth (kinks of Phi, absolute values), so the
pipeline is derivative-light:

  1. diminishing-step subgradient descent (step_init / sqrt(t)),
  2. a target-gap subgradient refinement that grows and halves its
     optimality-gap estimate with progress (sharp objectives need this:
     plain diminishing steps localize but do not pin a vertex),
  3. a golden-section polish over a direction set seeded with the
     coordinates and updated with the net-displacement direction,
     interleaved with structure-aware finishers: damped Newton steps from
     the generator's exact slope where Phi has curvature, and, where the
     generator is flat or jumpy, a kink snap (solve the small
     interpolation system pinning the closest-to-kink residuals exactly
     to their levels) plus walks along the polyhedron edges that relax
     one pinned residual at a time.  Line searches creep across flat
     valleys; the snaps land on their vertices.

Phases 2 and 3 alternate until one of them reports convergence.  Every
accepted point only ever improves the incumbent, so the best-so-far
modular value is nonincreasing throughout a start.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grids import GridFunction, modular
from .phi import PhiFunction
from .subspaces import Subspace

__all__ = [
    "SolverConfig",
    "BestApproxSolution",
    "NonFiniteObjectiveError",
    "solve",
    "solve_all_starts",
    "refine_solution",
    "brute_force_oracle",
]


class NonFiniteObjectiveError(ArithmeticError):
    """The modular overflowed; carries the first offending node."""

    def __init__(self, node_index: int, node_x: float):
        self.node_index = node_index
        self.node_x = node_x
        super().__init__(
            f"non-finite modular contribution at node {node_index} (x = {node_x!r})"
        )


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 600
    step_init: float = 1.0
    tol_obj: float = 1e-9
    tol_coeff: float = 1e-7
    n_starts: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.max_iters, self.n_starts) < 1:
            raise ValueError("max_iters and n_starts must be positive")
        if min(self.step_init, self.tol_obj, self.tol_coeff) <= 0:
            raise ValueError("step_init, tol_obj and tol_coeff must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be nonnegative")


@dataclass(frozen=True)
class BestApproxSolution:
    coeffs: np.ndarray
    modular_value: float
    iterations: int
    converged: bool
    start_id: int

    def to_json_dict(self) -> dict:
        return {
            "coeffs": [float(c) for c in self.coeffs],
            "modular_value": self.modular_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "start_id": self.start_id,
        }


class _Objective:
    """Fused residual/objective/subgradient evaluations on one instance."""

    def __init__(self, f: GridFunction, s: Subspace, phi: PhiFunction):
        f.grid.require_same(s.grid)
        self.fv = f.values
        self.basis = s.basis
        self.weighted_basis = s.weighted_basis
        self.w = s.grid.weights
        self.eta = s.grid.equality_tol
        self.phi = phi
        self.nodes = s.grid.nodes
        self.dim = s.dim
        self.kink_levels = np.array(sorted({0.0, *phi.generator.jump_points()}))
        # flat or jumpy generators make the objective (partly) polyhedral:
        # its minimizers then sit at vertices that edge walks can reach
        self.polyhedral = len(self.kink_levels) > 1 or any(
            p.is_constant() for p in phi.generator.pieces
        )

    def residual(self, c: np.ndarray) -> np.ndarray:
        return self.fv - c @ self.basis

    def value_from_residual(self, r: np.ndarray, strict: bool = False) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            contrib = self.w * self.phi(np.abs(r))
        total = float(contrib.sum())
        if not np.isfinite(total):
            if strict:
                bad = int(np.flatnonzero(~np.isfinite(contrib))[0])
                raise NonFiniteObjectiveError(bad, float(self.nodes[bad]))
            return np.inf
        return total

    def value(self, c: np.ndarray, strict: bool = False) -> float:
        return self.value_from_residual(self.residual(c), strict=strict)

    def subgradient_from_residual(self, r: np.ndarray) -> np.ndarray:
        absr = np.abs(r)
        d = self.phi.phi_right(absr) * np.sign(r)
        d[absr <= self.eta] = 0.0  # 0 is a valid choice inside the kink interval
        return -(self.weighted_basis @ d)


def _line_minimize(obj, c, r, value, direction, t_scale, t_tol):
    """Golden-section minimization of F along c + t*direction.

    Expands a symmetric bracket until both ends are no better than the
    center (convexity then traps a minimizer inside), shrinks by golden
    ratio, and returns the updated (c, r, value, evals).  Never accepts an
    increase.
    """
    dres = direction @ obj.basis  # residual changes by -t * dres

    def eval_at(t):
        return obj.value_from_residual(r - t * dres)

    T = t_scale
    expansions = 0
    fp, fm = eval_at(T), eval_at(-T)
    evals = 2
    while min(fp, fm) < value and expansions < 60:
        T *= 4.0
        fp, fm = eval_at(T), eval_at(-T)
        evals += 2
        expansions += 1
    lo, hi = -T, T
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = eval_at(x1), eval_at(x2)
    evals += 2
    while hi - lo > t_tol and evals < 220:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = eval_at(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = eval_at(x2)
        evals += 1
    candidates = [(f1, x1), (f2, x2)]
    fbest, tbest = min(candidates, key=lambda p: p[0])
    if fbest < value:
        c = c + tbest * direction
        r = r - tbest * dres
        value = fbest
    return c, r, value, evals


def _select_kink_nodes(obj: _Objective, r: np.ndarray):
    """Pick dim nodes whose |residual| sits nearest a kink level of Phi,
    greedily keeping the interpolation rows independent.

    Returns (node indices, per-node residual targets) or None when no
    independent set of full size exists among the closest candidates.
    """
    n = obj.dim
    absr = np.abs(r)
    if len(obj.kink_levels) == 1:
        level = np.zeros_like(absr)
    else:
        idx = np.searchsorted(obj.kink_levels, absr).clip(1, len(obj.kink_levels) - 1)
        below = obj.kink_levels[idx - 1]
        above = obj.kink_levels[idx]
        level = np.where(absr - below <= above - absr, below, above)
    dist = np.abs(absr - level)
    targets = np.sign(r) * level
    order = np.argsort(dist, kind="stable")
    chosen: list[int] = []
    rows: list[np.ndarray] = []
    for i in order[: max(8 * n, 64)]:
        trial_rows = rows + [obj.basis[:, i]]
        m = np.array(trial_rows)
        svals = np.linalg.svd(m, compute_uv=False)
        if svals[-1] > 1e-10 * svals[0]:
            rows.append(obj.basis[:, i])
            chosen.append(int(i))
            if len(chosen) == n:
                break
    if len(chosen) < n:
        return None
    return chosen, targets


def _kink_snap(obj: _Objective, r: np.ndarray, value: float):
    """Candidate vertex: solve the square system pinning the closest-to-kink
    residuals exactly to their levels; returned only on strict improvement."""
    selection = _select_kink_nodes(obj, r)
    if selection is None:
        return None
    chosen, targets = selection
    a = obj.basis[:, chosen].T
    b = obj.fv[chosen] - targets[chosen]
    try:
        c_snap = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    r_snap = obj.residual(c_snap)
    v_snap = obj.value_from_residual(r_snap)
    if v_snap < value:
        return c_snap, r_snap, v_snap
    return None


def _newton_snap(obj: _Objective, c: np.ndarray, r: np.ndarray, value: float):
    """Damped Newton step using the exact generator slope as curvature.

    The modular's Hessian (where it exists) is sum_i w_i * curvature(|r_i|)
    outer(basis_i); flat generators give a singular system and the step is
    skipped; the kink machinery owns those.  Steps are halved a few times
    and accepted only on strict improvement.
    """
    absr = np.abs(r)
    with np.errstate(over="ignore", invalid="ignore"):
        curv = obj.phi.curvature_right(absr)
    if not np.all(np.isfinite(curv)) or float(np.max(curv)) <= 0.0:
        return None
    d = obj.phi.phi_right(absr) * np.sign(r)
    d[absr <= obj.eta] = 0.0
    grad = -(obj.weighted_basis @ d)
    hess = (obj.basis * (obj.w * curv)) @ obj.basis.T
    try:
        step = np.linalg.solve(hess, -grad)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(step)):
        return None
    for damping in (1.0, 0.5, 0.25, 0.0625):
        trial = c + damping * step
        r_new = obj.residual(trial)
        v_new = obj.value_from_residual(r_new)
        if v_new < value:
            return trial, r_new, v_new
    return None


def _minimize_single_start(obj: _Objective, start: np.ndarray, cfg: SolverConfig):
    window = 50
    c = start.astype(float).copy()
    r = obj.residual(c)
    value = obj.value_from_residual(r, strict=True)
    start_value = value
    best_c, best_value = c.copy(), value
    iterations = 0
    converged = False

    # phase 1: diminishing-step subgradient descent
    stationary = False
    window_flat = False
    history = [(best_value, best_c.copy())]
    for t in range(1, cfg.max_iters + 1):
        g = obj.subgradient_from_residual(r)
        gnorm = float(np.linalg.norm(g))
        iterations += 1
        if gnorm < 1e-15:
            stationary = True  # zero subgradient: global minimizer of a convex F
            break
        c = c - (cfg.step_init / np.sqrt(t)) * g
        r = obj.residual(c)
        value = obj.value_from_residual(r)
        if not np.isfinite(value):
            c, r = best_c.copy(), obj.residual(best_c)
            value = best_value
            continue
        if value < best_value:
            best_value, best_c = value, c.copy()
        history.append((best_value, best_c.copy()))
        if len(history) > window:
            old_value, old_c = history.pop(0)
            obj_flat = old_value - best_value < cfg.tol_obj * (1.0 + abs(best_value))
            coeff_flat = np.linalg.norm(best_c - old_c) < cfg.tol_coeff * (
                1.0 + float(np.linalg.norm(best_c))
            )
            if obj_flat and coeff_flat:
                window_flat = True
                break

    # phases 2 and 3 alternate: target-gap subgradient refinement pulls a
    # point stalled at a suboptimal vertex back toward the optimal set, the
    # polish pins it; repeat until one of them reports convergence.  Only an
    # exactly vanishing subgradient skips refinement; a flat descent window
    # alone may just mean the diminishing steps bottomed out early.
    converged = stationary
    if not stationary:
        last_round_gain = 0.0
        for round_idx in range(3):
            round_start_value = best_value
            gap_hint = start_value - best_value if round_idx == 0 else last_round_gain
            best_c, best_value, used, level_ok = _level_refine(
                obj, best_c, best_value, cfg, gap_hint
            )
            iterations += used
            best_c, best_value, used, polish_ok = _polish(obj, best_c, best_value, cfg)
            iterations += used
            if level_ok or polish_ok:
                converged = True
                break
            last_round_gain = round_start_value - best_value
        converged = converged or window_flat

    return best_c, best_value, iterations, converged


def _level_refine(obj: _Objective, best_c, best_value, cfg: SolverConfig, gap_hint: float):
    """Subgradient steps toward a moving target below the incumbent.

    The optimality-gap estimate doubles on solid progress and halves on
    stalls; it starting near the hinted gap makes the steps long enough to
    traverse flat valleys.  Convergence is declared when the estimate
    shrinks below tol_obj or the subgradient vanishes.
    """
    budget = cfg.max_iters
    iterations = 0
    if budget < 10:
        return best_c, best_value, iterations, False
    c, r, value = best_c.copy(), obj.residual(best_c), best_value
    delta_cap = max(0.1 * gap_hint, 1e2 * cfg.tol_obj * (1.0 + abs(best_value)))
    delta = delta_cap
    converged = False
    for _ in range(budget):
        g = obj.subgradient_from_residual(r)
        gsq = float(g @ g)
        iterations += 1
        if gsq < 1e-30:
            converged = True
            break
        step = (value - (best_value - delta)) / gsq
        trial = c - step * g
        trial_r = obj.residual(trial)
        trial_value = obj.value_from_residual(trial_r)
        if trial_value < best_value - 0.25 * delta:
            c, r, value = trial, trial_r, trial_value
            best_value, best_c = trial_value, trial.copy()
            delta = min(2.0 * delta, delta_cap)
        else:
            if trial_value < best_value:
                best_value, best_c = trial_value, trial.copy()
            c, r, value = best_c.copy(), obj.residual(best_c), best_value
            delta *= 0.5
            if delta < cfg.tol_obj * (1.0 + abs(best_value)):
                converged = True
                break
    return best_c, best_value, iterations, converged


def _polish(obj: _Objective, best_c, best_value, cfg: SolverConfig):
    """Golden-section polish over an adaptive direction set, with
    structure-aware snaps (Newton for smooth curvature, vertex pinning and
    edge walks for the polyhedral part) each cycle."""
    cycles = min(12, cfg.max_iters // 50)
    iterations = 0
    converged = False
    if cycles == 0:
        return best_c, best_value, iterations, converged
    n = obj.dim
    directions = [np.eye(n)[j] for j in range(n)]
    c, r, value = best_c.copy(), obj.residual(best_c), best_value
    for cycle in range(cycles):
        cycle_start_value = value
        cycle_start_c = c.copy()
        gains = np.zeros(len(directions))
        scale = 0.25 * (1.0 + float(np.max(np.abs(c))))
        t_tol = max(1e-12, cfg.tol_coeff * (1.0 + float(np.max(np.abs(c)))))
        for j, d in enumerate(directions):
            before = value
            c, r, value, used = _line_minimize(obj, c, r, value, d, scale, t_tol)
            iterations += 1
            gains[j] = before - value
        displacement = c - cycle_start_c
        disp_norm = float(np.linalg.norm(displacement))
        if disp_norm > 10.0 * t_tol and n > 1:
            d = displacement / disp_norm
            c, r, value, used = _line_minimize(obj, c, r, value, d, scale, t_tol)
            iterations += 1
            directions[int(np.argmax(gains))] = d
        if (cycle + 1) % (n + 1) == 0:
            directions = [np.eye(n)[j] for j in range(n)]

        snapped = _newton_snap(obj, c, r, value)
        iterations += 1
        if snapped is not None:
            c, r, value = snapped
        snapped = _kink_snap(obj, r, value)
        iterations += 1
        if snapped is not None:
            c, r, value = snapped
        if obj.polyhedral:
            # walk the edges that relax one pinned residual at a time
            selection = _select_kink_nodes(obj, r)
            if selection is not None:
                chosen, _ = selection
                a = obj.basis[:, chosen].T
                try:
                    edges = np.linalg.solve(a, np.eye(n))
                except np.linalg.LinAlgError:
                    edges = None
                if edges is not None:
                    for j in range(n):
                        edge = edges[:, j]
                        nrm = float(np.linalg.norm(edge))
                        if nrm > 0:
                            c, r, value, used = _line_minimize(
                                obj, c, r, value, edge / nrm, scale, t_tol
                            )
                            iterations += 1
                    snapped = _kink_snap(obj, r, value)
                    iterations += 1
                    if snapped is not None:
                        c, r, value = snapped

        if value < best_value:
            best_value, best_c = value, c.copy()
        improvement = cycle_start_value - value
        disp_tol = max(
            cfg.tol_coeff * (1.0 + float(np.linalg.norm(c))),
            3.0 * t_tol * np.sqrt(n),  # line searches cannot resolve below t_tol
        )
        if improvement < cfg.tol_obj * (1.0 + abs(value)) and disp_norm <= disp_tol:
            converged = True
            break
    return best_c, best_value, iterations, converged


def solve_all_starts(
    f: GridFunction, s: Subspace, phi: PhiFunction, cfg: SolverConfig
) -> list[BestApproxSolution]:
    """Run every seeded start to completion and return all solutions.

    Starts are Gaussian with standard deviation matched to the magnitude of
    f, so multi-start clustering downstream sees genuinely spread initial
    points.  Start results are independent; the list order is by start id.
    """
    obj = _Objective(f, s, phi)
    rng = np.random.default_rng(cfg.rng_seed)
    scale = max(1.0, float(np.max(np.abs(f.values))))
    starts = rng.standard_normal((cfg.n_starts, s.dim)) * scale
    out = []
    for sid in range(cfg.n_starts):
        coeffs, value, iters, converged = _minimize_single_start(obj, starts[sid], cfg)
        out.append(
            BestApproxSolution(
                coeffs=coeffs,
                modular_value=value,
                iterations=iters,
                converged=converged,
                start_id=sid,
            )
        )
    return out


def solve(
    f: GridFunction, s: Subspace, phi: PhiFunction, cfg: Optional[SolverConfig] = None
) -> BestApproxSolution:
    """Best coefficients over all starts (min by modular value, then start id)."""
    cfg = cfg or SolverConfig()
    solutions = solve_all_starts(f, s, phi, cfg)
    return min(solutions, key=lambda sol: (sol.modular_value, sol.start_id))


def refine_solution(
    f: GridFunction,
    s: Subspace,
    phi: PhiFunction,
    cfg: SolverConfig,
    coeffs,
    gap_hint: float = 0.0,
    toward=None,
    start_id: int = -2,
) -> BestApproxSolution:
    """Continue minimizing from a given point.

    When ``toward`` names a better point, a line search along the segment
    to it runs first: convexity guarantees that segment descends, which
    rescues points stranded on nearly flat valleys where subgradients are
    uninformative.  Then the target-gap refinement (seeded with gap_hint
    when the caller knows the suboptimality) and the polish finish up.
    """
    obj = _Objective(f, s, phi)
    c = np.asarray(coeffs, dtype=float).copy()
    r = obj.residual(c)
    value = obj.value_from_residual(r, strict=True)
    iterations = 0
    if toward is not None:
        direction = np.asarray(toward, dtype=float) - c
        nrm = float(np.linalg.norm(direction))
        if nrm > 0:
            t_tol = max(1e-12, 0.01 * cfg.tol_coeff * (1.0 + float(np.max(np.abs(c)))))
            c, r, value, used = _line_minimize(
                obj, c, r, value, direction / nrm, nrm, t_tol
            )
            iterations += 1
    best_c, best_value, used_a, level_ok = _level_refine(
        obj, c, value, cfg, max(gap_hint, 0.0)
    )
    best_c, best_value, used_b, polish_ok = _polish(obj, best_c, best_value, cfg)
    return BestApproxSolution(
        coeffs=best_c,
        modular_value=best_value,
        iterations=iterations + used_a + used_b,
        converged=level_ok or polish_ok,
        start_id=start_id,
    )


def brute_force_oracle(
    f: GridFunction,
    s: Subspace,
    phi: PhiFunction,
    box: Sequence[tuple[float, float]],
    resolution: int,
) -> BestApproxSolution:
    """Exhaustive grid search over a coefficient box; dimensions <= 3 only.

    Returns the grid minimizer, which convexity places within one grid cell
    of the true minimizer of the discretized objective.  Serves as the
    independent check on the iterative solver; it shares nothing with it
    but the modular.
    """
    n = s.dim
    if n > 3:
        raise ValueError("oracle limited to 3 coefficients (cost grows as resolution**n)")
    if resolution < 10:
        raise ValueError("need resolution >= 10")
    if len(box) != n:
        raise ValueError(f"box must give {n} coordinate intervals")
    axes = []
    for lo, hi in box:
        if not lo < hi:
            raise ValueError("box intervals need lo < hi")
        axes.append(np.linspace(lo, hi, resolution))
    mesh = np.meshgrid(*axes, indexing="ij")
    candidates = np.stack([m.ravel() for m in mesh], axis=1)
    fv = f.values
    w = s.grid.weights
    best_value, best_row = np.inf, 0
    chunk = max(1, 2_000_000 // max(1, s.grid.n_nodes))
    for lo_row in range(0, candidates.shape[0], chunk):
        block = candidates[lo_row : lo_row + chunk]
        res = np.abs(fv[None, :] - block @ s.basis)
        values = phi(res) @ w
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value, best_row = float(values[i]), lo_row + i
    coeffs = candidates[best_row].copy()
    value = modular(phi, f - s.element(coeffs))
    return BestApproxSolution(
        coeffs=coeffs,
        modular_value=value,
        iterations=candidates.shape[0],
        converged=True,
        start_id=-1,
    )
