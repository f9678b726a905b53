"""Optimality certificates for best approximations in the modular sense.

A candidate P is optimal iff for every direction Q in the subspace the
one-sided derivative of eps -> modular(f - (P + eps*Q)) at 0+ is
nonnegative.  That derivative has a closed form over the sign sets of Q
and of the residual f - P, with the left generator value weighting
sign-compatible nodes, the right value weighting sign-opposed nodes, and
the right value at zero weighting the equality band.  The certificate
evaluates the resulting inequality over a finite direction family
(both signs of each basis element plus seeded random span elements) and
records one margin per direction; it therefore certifies optimality
against those directions, not against the whole continuum of them; for
smooth generators the condition is linear in Q and the basis directions
already decide it.

Residual values inside the equality band belong to the right-hand side
and never reach the left generator value, which is undefined at 0.
Residuals within the equality tolerance of a generator jump point are
evaluated at the jump point itself: a float whisker past a kink would
otherwise flip the one-sided value and misprice the derivative of a
candidate whose residuals sit exactly on the kink.

All checks are pure functions of immutable inputs; direction evaluations
are independent of each other and the certificate assembly does not
depend on their order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GridFunction, measure, NodeSet
from .phi import PhiFunction
from .subspaces import Subspace

__all__ = [
    "DirectionCheck",
    "Certificate",
    "DirectionalDerivative",
    "check_characterization",
    "check_smooth_characterization",
    "directional_derivative",
    "sign_consistency",
    "is_gamma_set",
]


@dataclass(frozen=True)
class DirectionCheck:
    label: str
    q: GridFunction
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class Certificate:
    directions: list[DirectionCheck]
    verdict: bool
    tol: float

    @property
    def worst_margin(self) -> float:
        return min(d.margin for d in self.directions)

    @property
    def n_directions(self) -> int:
        return len(self.directions)

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "tol": self.tol,
            "n_directions": self.n_directions,
            "worst_margin": self.worst_margin,
            "directions": [
                {"label": d.label, "lhs": d.lhs, "rhs": d.rhs, "margin": d.margin}
                for d in self.directions
            ],
        }


@dataclass(frozen=True)
class DirectionalDerivative:
    q: GridFunction
    value: float


def _residual_masks(r: np.ndarray, eta: float):
    pos = r > eta
    neg = r < -eta
    eq = ~(pos | neg)
    return pos, neg, eq


def _snap_to_jump_levels(phi: PhiFunction, absr: np.ndarray, eta: float) -> np.ndarray:
    """Round |residual| values within eta of a generator jump point onto it.

    The snap radius is capped below half the spacing between kink levels,
    so an oversized equality tolerance can never make a value ambiguous
    between two jumps.
    """
    jumps = phi.generator.jump_points()
    if not jumps:
        return absr
    gaps = np.diff(np.concatenate(([0.0], jumps)))
    radius = min(eta, 0.49 * float(gaps.min()))
    out = absr.copy()
    for a in jumps:
        out[np.abs(out - a) <= radius] = a
    return out


def _direction_family(s: Subspace, n_random: int, rng_seed: int):
    """Both signs of each basis element plus seeded random span elements."""
    dirs: list[tuple[str, np.ndarray]] = []
    for i in range(s.dim):
        dirs.append((f"+{s.labels[i]}", s.basis[i].copy()))
        dirs.append((f"-{s.labels[i]}", -s.basis[i]))
    rng = np.random.default_rng(rng_seed)
    for k in range(n_random):
        c = rng.standard_normal(s.dim)
        c /= np.linalg.norm(c)
        dirs.append((f"rand{k}", c @ s.basis))
    return dirs


def _sides(phi: PhiFunction, w, r, qv, eta: float) -> tuple[float, float]:
    pos, neg, eq = _residual_masks(r, eta)
    qpos = qv > 0
    qneg = qv < 0
    absr = _snap_to_jump_levels(phi, np.abs(r), eta)
    absq = np.abs(qv)
    lhs = 0.0
    aligned = (qpos & pos) | (qneg & neg)
    opposed = (qneg & pos) | (qpos & neg)
    if aligned.any():
        lhs += float(np.dot(w[aligned], phi.phi_left(absr[aligned]) * absq[aligned]))
    if opposed.any():
        lhs -= float(np.dot(w[opposed], phi.phi_right(absr[opposed]) * absq[opposed]))
    rhs = phi.phi_right_at_zero() * float(np.dot(w[eq], absq[eq]))
    return lhs, rhs


def check_characterization(
    f: GridFunction,
    p: GridFunction,
    s: Subspace,
    phi: PhiFunction,
    tol: float,
    n_random: int = 8,
    rng_seed: int = 0,
) -> Certificate:
    """Certify p as a best approximation of f from s, against a finite
    direction family.

    Per direction Q the certificate compares

        lhs = int over sign-aligned nodes of phi_left(|f-p|)|Q|
              - int over sign-opposed nodes of phi_right(|f-p|)|Q|
        rhs = phi_right(0) * int over the equality band of |Q|

    and the verdict is True iff rhs - lhs >= -tol for every direction.
    The margin equals the one-sided derivative of the modular along Q.
    """
    f.grid.require_same(p.grid)
    f.grid.require_same(s.grid)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    w = f.grid.weights
    eta = f.grid.equality_tol
    r = f.values - p.values
    checks = []
    for label, qv in _direction_family(s, n_random, rng_seed):
        lhs, rhs = _sides(phi, w, r, qv, eta)
        checks.append(DirectionCheck(label=label, q=GridFunction(f.grid, qv), lhs=lhs, rhs=rhs))
    verdict = all(c.margin >= -tol for c in checks)
    return Certificate(directions=checks, verdict=verdict, tol=tol)


def check_smooth_characterization(
    f: GridFunction,
    p: GridFunction,
    s: Subspace,
    phi: PhiFunction,
    tol: float,
    n_random: int = 8,
    rng_seed: int = 0,
) -> Certificate:
    """Two-sided certificate valid when the generator has no jumps:

        |int phi(|f-p|) sgn(f-p) Q| <= phi(0+) * int over {f=p} of |Q|.

    Jump generators are rejected: with distinct one-sided values the
    condition is no longer two-sided in Q.
    """
    if phi.has_jumps():
        raise ValueError(
            "smooth certificate called with a jump generator; "
            "use check_characterization instead"
        )
    f.grid.require_same(p.grid)
    f.grid.require_same(s.grid)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    w = f.grid.weights
    eta = f.grid.equality_tol
    r = f.values - p.values
    pos, neg, eq = _residual_masks(r, eta)
    sgn = np.where(pos, 1.0, np.where(neg, -1.0, 0.0))
    active = ~eq
    phivals = np.zeros_like(r)
    if active.any():
        phivals[active] = phi.phi_right(np.abs(r[active]))
    phi0 = phi.phi_right_at_zero()
    checks = []
    for label, qv in _direction_family(s, n_random, rng_seed):
        lhs = abs(float(np.dot(w, phivals * sgn * qv)))
        rhs = phi0 * float(np.dot(w[eq], np.abs(qv[eq])))
        checks.append(DirectionCheck(label=label, q=GridFunction(f.grid, qv), lhs=lhs, rhs=rhs))
    verdict = all(c.margin >= -tol for c in checks)
    return Certificate(directions=checks, verdict=verdict, tol=tol)


def directional_derivative(
    f: GridFunction, p: GridFunction, q: GridFunction, phi: PhiFunction
) -> DirectionalDerivative:
    """One-sided derivative at 0+ of eps -> modular(f - (p + eps*q)).

    Five masked quadratures: sign-aligned nodes carry the left generator
    value, sign-opposed nodes the right one, and the equality band
    contributes phi_right(0) * |q|.  Positive at a minimizer for every
    span direction.
    """
    f.grid.require_same(p.grid)
    f.grid.require_same(q.grid)
    w = f.grid.weights
    eta = f.grid.equality_tol
    r = f.values - p.values
    qv = q.values
    pos, neg, eq = _residual_masks(r, eta)
    qpos = qv > 0
    qneg = qv < 0
    absr = _snap_to_jump_levels(phi, np.abs(r), eta)
    value = 0.0
    m = qpos & pos
    if m.any():
        value -= float(np.dot(w[m], phi.phi_left(absr[m]) * qv[m]))
    m = qneg & pos
    if m.any():
        value -= float(np.dot(w[m], phi.phi_right(absr[m]) * qv[m]))
    m = qpos & neg
    if m.any():
        value += float(np.dot(w[m], phi.phi_right(absr[m]) * qv[m]))
    m = qneg & neg
    if m.any():
        value += float(np.dot(w[m], phi.phi_left(absr[m]) * qv[m]))
    value += phi.phi_right_at_zero() * float(np.dot(w[eq], np.abs(qv[eq])))
    return DirectionalDerivative(q=q, value=value)


def sign_consistency(
    f: GridFunction, p1: GridFunction, p2: GridFunction
) -> tuple[float, bool]:
    """Measure of nodes where the residuals of two candidates disagree in sign.

    Two best approximations must satisfy (f-p1)(f-p2) >= 0 off a null set;
    the grid surrogate tolerates a product above -eta**2 and accepts a
    violation set of measure up to 10*eta*(b-a).
    """
    f.grid.require_same(p1.grid)
    f.grid.require_same(p2.grid)
    grid = f.grid
    eta = grid.equality_tol
    product = (f.values - p1.values) * (f.values - p2.values)
    violations = NodeSet(grid, product < -(eta * eta))
    violation_measure = measure(grid, violations)
    verdict = violation_measure <= 10.0 * eta * (grid.b - grid.a)
    return violation_measure, verdict


def is_gamma_set(
    f: GridFunction,
    s: Subspace,
    phi: PhiFunction,
    tol: float,
    n_random: int = 8,
    rng_seed: int = 0,
) -> bool:
    """True when the zero function is a best approximation of f, i.e. the
    zero set of f behaves as a gamma-set for this subspace and Phi."""
    zero = GridFunction.zero(f.grid)
    return check_characterization(
        f, zero, s, phi, tol, n_random=n_random, rng_seed=rng_seed
    ).verdict
