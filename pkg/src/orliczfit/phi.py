"""Convex Young-type functions built from nondecreasing generators.

A generator is a nondecreasing function defined for t >= 0, positive for
t > 0, represented here as finitely many pieces.  Each piece is a sum of
power terms ``coef * (t - shift)**exp`` valid on ``[lo, next_lo)``.  The
associated convex function is the exact antiderivative accumulated from 0,

    Phi(x) = integral of the generator over [0, x],

so Phi, its one-sided derivatives and its affine segments are all exact
(no quadrature error).  Power terms with real exponents keep Phi(x) = x**p
exact for non-integer p as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Piece",
    "Generator",
    "PhiFunction",
    "AffineSegment",
    "make_power_phi",
    "make_linear_then_convex_phi",
    "make_staircase_phi",
    "delta2_ratio",
    "find_affine_segments",
]

_VALIDATION_SAMPLES = 33
_MONOTONE_SLACK = 1e-12


def _partition_apply(los: np.ndarray, t: np.ndarray, side: str, fns) -> np.ndarray:
    """Apply per-piece callables to t grouped by piece membership.

    Grouping via one stable argsort beats boolean masks per piece when the
    generator has many segments (staircase generators are the hot case).
    """
    idx = np.searchsorted(los, t, side=side) - 1
    np.clip(idx, 0, len(fns) - 1, out=idx)
    order = np.argsort(idx, kind="stable")
    sorted_t = t[order]
    counts = np.bincount(idx, minlength=len(fns))
    out_sorted = np.empty_like(sorted_t)
    pos = 0
    for j, fn in enumerate(fns):
        cnt = int(counts[j])
        if cnt:
            out_sorted[pos : pos + cnt] = fn(sorted_t[pos : pos + cnt])
            pos += cnt
    out = np.empty_like(t)
    out[order] = out_sorted
    return out


@dataclass(frozen=True)
class Piece:
    """One segment of a generator: sum of coef*(t-shift)**exp on [lo, hi_of_next).

    Exponents must be >= 0 and shift <= lo so bases stay nonnegative.
    """

    lo: float
    shift: float
    coefs: tuple[float, ...]
    exps: tuple[float, ...]

    def __post_init__(self):
        if len(self.coefs) != len(self.exps):
            raise ValueError("coefs and exps must have equal length")
        if not self.coefs:
            raise ValueError("piece needs at least one term")
        if any(e < 0 for e in self.exps):
            raise ValueError("negative exponents are not allowed")
        if self.shift > self.lo + 1e-15:
            raise ValueError("piece shift must not exceed its left endpoint")
        # split constant mass from power terms once; evaluation is hot
        const = sum(c for c, e in zip(self.coefs, self.exps) if e == 0.0)
        terms = tuple((c, e) for c, e in zip(self.coefs, self.exps) if e != 0.0)
        object.__setattr__(self, "_const", float(const))
        object.__setattr__(self, "_terms", terms)
        object.__setattr__(
            self,
            "_anti_terms",
            tuple((c / (e + 1.0), e + 1.0) for c, e in zip(self.coefs, self.exps)),
        )

    def value(self, t):
        """Evaluate the piece at t (scalar or ndarray); valid for t >= shift."""
        t = np.asarray(t, dtype=float)
        u = t - self.shift
        out = np.full_like(u, self._const)
        for c, e in self._terms:
            out += c * np.power(u, e)
        return out if out.ndim else float(out)

    def antiderivative(self, t):
        """Antiderivative of the piece vanishing at t = shift."""
        t = np.asarray(t, dtype=float)
        u = t - self.shift
        out = np.zeros_like(u)
        for c, e in self._anti_terms:
            out += c * np.power(u, e)
        return out if out.ndim else float(out)

    def derivative(self, t):
        """Slope of the piece; may blow up at t = shift for exponents in (0, 1)."""
        t = np.asarray(t, dtype=float)
        u = t - self.shift
        out = np.zeros_like(u)
        with np.errstate(divide="ignore", over="ignore"):
            for c, e in zip(self.coefs, self.exps):
                if e != 0.0:
                    out += c * e * np.power(u, e - 1.0)
        return out if out.ndim else float(out)

    def is_constant(self) -> bool:
        return all(c == 0.0 for c, e in zip(self.coefs, self.exps) if e != 0.0)

    def constant_value(self) -> float:
        return float(sum(c for c, e in zip(self.coefs, self.exps) if e == 0.0))


class Generator:
    """Piecewise power-term generator; the membership checks of the
    nondecreasing-positive class are enforced numerically at construction.

    Pieces must start at 0 with strictly increasing left endpoints; the last
    piece extends to +infinity.  Upward jumps between pieces are allowed,
    downward ones are not.
    """

    def __init__(self, pieces: Sequence[Piece]):
        pieces = tuple(pieces)
        if not pieces:
            raise ValueError("generator needs at least one piece")
        if pieces[0].lo != 0.0:
            raise ValueError("first piece must start at t = 0")
        los = [p.lo for p in pieces]
        if any(b <= a for a, b in zip(los, los[1:])):
            raise ValueError("piece breakpoints must be strictly increasing")
        self.pieces = pieces
        self._los = np.array(los, dtype=float)
        self._los.flags.writeable = False
        self._validate()

    @property
    def breakpoints(self) -> np.ndarray:
        """Left endpoints of the pieces (the first is always 0)."""
        return self._los.copy()

    def _sample_span(self, i: int) -> tuple[float, float]:
        lo = self.pieces[i].lo
        if i + 1 < len(self.pieces):
            return lo, self.pieces[i + 1].lo
        return lo, 2.0 * lo + 1.0  # finite horizon for the tail piece

    def _validate(self):
        prev_end_value = None
        for i, piece in enumerate(self.pieces):
            lo, hi = self._sample_span(i)
            ts = np.linspace(lo, hi, _VALIDATION_SAMPLES)
            vals = np.asarray(piece.value(ts))
            scale = 1.0 + float(np.max(np.abs(vals)))
            if np.any(vals < -_MONOTONE_SLACK * scale):
                raise ValueError(f"generator is negative inside piece {i}")
            if np.any(np.diff(vals) < -_MONOTONE_SLACK * scale):
                raise ValueError(f"generator decreases inside piece {i}")
            positive_ts = ts[ts > 0]
            if positive_ts.size and np.any(np.asarray(piece.value(positive_ts)) <= 0.0):
                raise ValueError(f"generator must be positive for t > 0 (piece {i})")
            if prev_end_value is not None:
                start_value = float(piece.value(lo))
                if start_value < prev_end_value - _MONOTONE_SLACK * (1.0 + abs(prev_end_value)):
                    raise ValueError(f"generator jumps downward at breakpoint t = {lo}")
            prev_end_value = float(piece.value(hi))

    def value_right(self, t):
        """phi(t) as a right limit (the defining piece of [t, ...))."""
        return self._eval(t, side="right")

    def value_left(self, t):
        """phi(t) as a left limit; undefined at t = 0."""
        return self._eval(t, side="left")

    def _eval(self, t, side: str):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        if np.any(t_arr < 0):
            raise ValueError("generator arguments must be nonnegative")
        if side == "left" and np.any(t_arr <= 0.0):
            raise ValueError("left generator value is undefined at t = 0")
        if len(self.pieces) == 1:
            out = np.asarray(self.pieces[0].value(t_arr))
        else:
            shape = t_arr.shape
            out = _partition_apply(
                self._los, t_arr.ravel(), side, [p.value for p in self.pieces]
            ).reshape(shape)
        return float(out[0]) if scalar else out

    def slope_right(self, t):
        """Right-limit slope of the generator (ignores jumps themselves)."""
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        if np.any(t_arr < 0):
            raise ValueError("generator arguments must be nonnegative")
        if len(self.pieces) == 1:
            out = np.asarray(self.pieces[0].derivative(t_arr))
        else:
            shape = t_arr.shape
            out = _partition_apply(
                self._los, t_arr.ravel(), "right", [p.derivative for p in self.pieces]
            ).reshape(shape)
        return float(out[0]) if scalar else out

    def has_jumps(self, rel_tol: float = 1e-12) -> bool:
        """True when phi is discontinuous at some interior breakpoint."""
        for prev, nxt in zip(self.pieces, self.pieces[1:]):
            left = float(prev.value(nxt.lo))
            right = float(nxt.value(nxt.lo))
            if right - left > rel_tol * (1.0 + abs(left)):
                return True
        return False

    def jump_points(self, rel_tol: float = 1e-12) -> list[float]:
        pts = []
        for prev, nxt in zip(self.pieces, self.pieces[1:]):
            left = float(prev.value(nxt.lo))
            right = float(nxt.value(nxt.lo))
            if right - left > rel_tol * (1.0 + abs(left)):
                pts.append(nxt.lo)
        return pts


class PhiFunction:
    """Exact antiderivative of a generator, with one-sided derivatives.

    Values are immutable after construction; instances are safe to share
    across threads and reuse between solver runs.
    """

    def __init__(self, generator: Generator):
        self.generator = generator
        los = generator._los
        # accumulate Phi at each breakpoint so Phi is continuous
        phi_at_lo = np.zeros(len(los))
        for j in range(1, len(los)):
            piece = generator.pieces[j - 1]
            seg = piece.antiderivative(los[j]) - piece.antiderivative(los[j - 1])
            phi_at_lo[j] = phi_at_lo[j - 1] + seg
        self._phi_at_lo = phi_at_lo
        self._anti_at_lo = np.array(
            [p.antiderivative(p.lo) for p in generator.pieces], dtype=float
        )
        offsets = self._phi_at_lo - self._anti_at_lo

        def segment_fn(piece: Piece, offset: float):
            return lambda t: offset + piece.antiderivative(t)

        self._segment_fns = [
            segment_fn(p, float(off)) for p, off in zip(generator.pieces, offsets)
        ]

    @property
    def breakpoints(self) -> np.ndarray:
        return self.generator.breakpoints

    def __call__(self, x):
        """Phi(x) for x >= 0, scalar or ndarray."""
        x_arr = np.asarray(x, dtype=float)
        scalar = x_arr.ndim == 0
        x_arr = np.atleast_1d(x_arr)
        if np.any(x_arr < 0):
            raise ValueError("Phi is defined for x >= 0; pass |x|")
        if len(self._segment_fns) == 1:
            out = np.asarray(self._segment_fns[0](x_arr))
        else:
            shape = x_arr.shape
            out = _partition_apply(
                self.generator._los, x_arr.ravel(), "right", self._segment_fns
            ).reshape(shape)
        return float(out[0]) if scalar else out

    def phi_right(self, x):
        """Right derivative of Phi at x >= 0 (the generator's right limit)."""
        return self.generator.value_right(x)

    def phi_left(self, x):
        """Left derivative of Phi at x > 0; raises at x = 0 where it is undefined."""
        return self.generator.value_left(x)

    def phi_right_at_zero(self) -> float:
        return float(self.generator.value_right(0.0))

    def curvature_right(self, x):
        """Right-limit second derivative of Phi (slope of the generator)."""
        return self.generator.slope_right(x)

    def has_jumps(self) -> bool:
        return self.generator.has_jumps()


@dataclass(frozen=True)
class AffineSegment:
    """Interval [lo, hi] on which Phi(x) = slope*x + intercept exactly."""

    lo: float
    hi: float
    slope: float
    intercept: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("affine segment needs lo < hi")


def make_power_phi(p: float) -> PhiFunction:
    """Phi(x) = x**p for p >= 1, via the generator p*t**(p-1).

    p < 1 is rejected: the generator would be decreasing, leaving the
    nondecreasing class.
    """
    if p < 1.0:
        raise ValueError(f"power exponent must be >= 1, got {p}")
    if p == 1.0:
        piece = Piece(lo=0.0, shift=0.0, coefs=(1.0,), exps=(0.0,))
    else:
        piece = Piece(lo=0.0, shift=0.0, coefs=(float(p),), exps=(float(p) - 1.0,))
    return PhiFunction(Generator([piece]))


def make_linear_then_convex_phi(k: float, c: float, p: float) -> PhiFunction:
    """Phi affine with slope k on [0, c], strictly convex beyond.

    Generator: k on [0, c], then k + (t - c)**(p-1); continuous at the
    junction, so Phi is C^1 there.
    """
    if k <= 0 or c <= 0:
        raise ValueError("k and c must be positive")
    if p <= 1.0:
        raise ValueError("convex part needs p > 1")
    head = Piece(lo=0.0, shift=0.0, coefs=(float(k),), exps=(0.0,))
    tail = Piece(lo=float(c), shift=float(c), coefs=(float(k), 1.0), exps=(0.0, float(p) - 1.0))
    return PhiFunction(Generator([head, tail]))


def make_staircase_phi(
    base: Union[PhiFunction, Generator],
    jumps: Iterable[tuple[float, float]],
) -> PhiFunction:
    """Add upward jumps to a base generator at given points.

    ``jumps`` lists (point, size) with points strictly decreasing and
    positive (the natural order for a sequence accumulating at 0) and all
    sizes positive.  The result's generator equals the base plus the sum of
    the jump sizes at or below t; its antiderivative stays continuous and
    convex.  An empty jump list reproduces the base function.
    """
    gen = base.generator if isinstance(base, PhiFunction) else base
    jumps = list(jumps)
    points = [float(a) for a, _ in jumps]
    sizes = [float(s) for _, s in jumps]
    if any(a <= 0.0 for a in points):
        raise ValueError("jump points must be positive")
    if any(b >= a for a, b in zip(points, points[1:])):
        raise ValueError("jump points must be strictly decreasing")
    if any(s <= 0.0 for s in sizes):
        raise ValueError("jump sizes must be positive")
    if not jumps:
        return PhiFunction(Generator(gen.pieces))

    ascending = sorted(zip(points, sizes))
    base_los = [p.lo for p in gen.pieces]
    cut_points = sorted(set(base_los) | {a for a, _ in ascending})
    pieces = []
    for lo in cut_points:
        j = int(np.searchsorted(base_los, lo, side="right")) - 1
        src = gen.pieces[j]
        accumulated = sum(s for a, s in ascending if a <= lo)
        pieces.append(
            Piece(
                lo=lo,
                shift=src.shift,
                coefs=src.coefs + ((accumulated,) if accumulated else ()),
                exps=src.exps + ((0.0,) if accumulated else ()),
            )
        )
    return PhiFunction(Generator(pieces))


def delta2_ratio(phi: PhiFunction, x_max: float, samples: int) -> float:
    """Empirical doubling constant: max of Phi(2x)/Phi(x) over sampled x.

    Samples are uniform on (0, x_max].  This is a lower bound for any
    constant Lambda with Phi(2x) <= Lambda*Phi(x), not a certified supremum.
    """
    if x_max <= 0:
        raise ValueError("x_max must be positive")
    if samples < 2:
        raise ValueError("need samples >= 2")
    xs = x_max * np.arange(1, samples + 1) / samples
    return float(np.max(phi(2.0 * xs) / phi(xs)))


def find_affine_segments(phi: PhiFunction) -> list[AffineSegment]:
    """Maximal intervals on which the generator is constant (Phi affine).

    Returns an empty list iff Phi is strictly convex on its whole
    represented domain.  The tail segment, when affine, has hi = inf.
    """
    gen = phi.generator
    segments: list[AffineSegment] = []
    run_start = None
    run_slope = None
    for j, piece in enumerate(gen.pieces):
        hi = gen.pieces[j + 1].lo if j + 1 < len(gen.pieces) else math.inf
        if piece.is_constant():
            slope = piece.constant_value()
            if run_slope is not None and slope == run_slope:
                continue  # extend the current run
            if run_start is not None:
                segments.append(_affine(phi, run_start, piece.lo, run_slope))
            run_start, run_slope = piece.lo, slope
        else:
            if run_start is not None:
                segments.append(_affine(phi, run_start, piece.lo, run_slope))
                run_start = run_slope = None
    if run_start is not None:
        segments.append(_affine(phi, run_start, math.inf, run_slope))
    return segments


def _affine(phi: PhiFunction, lo: float, hi: float, slope: float) -> AffineSegment:
    intercept = float(phi(lo)) - slope * lo
    return AffineSegment(lo=lo, hi=hi, slope=slope, intercept=intercept)
