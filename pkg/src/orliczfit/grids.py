"""Discretization of a bounded interval: weighted nodes, grid functions,
modulars and node-set measures.

A Grid is a composite-midpoint quadrature of [a, b]; its weights sum to
b - a, so summing Phi(|g|) against the weights approximates the integral
of Phi(|g|).  Node subsets stand in for measurable sets: their measure is
the sum of the node weights, and the almost-everywhere statements of the
continuum theory translate to "all but an eta-measured node set", with eta
the grid's equality tolerance.

Grids and grid functions freeze their arrays at construction and the
modular is a pure reduction, so everything here is safe to share across
threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .phi import PhiFunction

__all__ = [
    "Grid",
    "GridFunction",
    "NodeSet",
    "GridMismatchError",
    "make_uniform_grid",
    "modular",
    "measure",
    "equality_set",
]


class GridMismatchError(ValueError):
    """Raised when an operation mixes functions living on different grids."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes and weights on [a, b] plus the equality tolerance eta."""

    a: float
    b: float
    nodes: np.ndarray
    weights: np.ndarray
    equality_tol: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("need a < b")
        if self.equality_tol <= 0:
            raise ValueError("equality_tol must be positive")
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or weights.shape != nodes.shape:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(float(weights.sum()) - (self.b - self.a)) > 1e-12 * (1.0 + self.b - self.a):
            raise ValueError("weights must sum to b - a")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def compatible(self, other: "Grid") -> bool:
        return self is other or (
            self.a == other.a
            and self.b == other.b
            and self.equality_tol == other.equality_tol
            and np.array_equal(self.nodes, other.nodes)
        )

    def require_same(self, other: "Grid"):
        if not self.compatible(other):
            raise GridMismatchError("operands live on different grids")


def make_uniform_grid(a: float, b: float, n_nodes: int, equality_tol: float = 1e-8) -> Grid:
    """Composite midpoint rule: midpoints of n equal subintervals of [a, b]."""
    if not a < b:
        raise ValueError("need a < b")
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    h = (b - a) / n_nodes
    nodes = a + h * (np.arange(n_nodes) + 0.5)
    weights = np.full(n_nodes, h)
    return Grid(a=a, b=b, nodes=nodes, weights=weights, equality_tol=equality_tol)


class GridFunction:
    """A function represented by its values at the grid nodes."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.nodes.shape:
            raise ValueError("value count must match the node count")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid-function values must be finite")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    @classmethod
    def zero(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.n_nodes))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self.grid.require_same(other.grid)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self.grid.require_same(other.grid)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for x, v in zip(self.grid.nodes, self.values):
                writer.writerow([repr(float(x)), repr(float(v))])

    @classmethod
    def from_csv(cls, grid: Grid, path) -> "GridFunction":
        """Load a two-column (node, value) CSV; nodes must match the grid."""
        xs, vs = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                xs.append(float(row[0]))
                vs.append(float(row[1]))
        xs = np.asarray(xs)
        if xs.size != grid.n_nodes:
            raise ValueError(
                f"CSV has {xs.size} rows but the grid has {grid.n_nodes} nodes"
            )
        scale = 1.0 + abs(grid.a) + abs(grid.b)
        if np.max(np.abs(xs - grid.nodes)) > 1e-9 * scale:
            raise ValueError("CSV nodes do not match the grid nodes")
        return cls(grid, vs)


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Boolean mask selecting a subset of the grid nodes."""

    grid: Grid
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.nodes.shape:
            raise ValueError("mask length must match the node count")
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    def __invert__(self) -> "NodeSet":
        return NodeSet(self.grid, ~self.mask)

    def __and__(self, other: "NodeSet") -> "NodeSet":
        self.grid.require_same(other.grid)
        return NodeSet(self.grid, self.mask & other.mask)

    def __or__(self, other: "NodeSet") -> "NodeSet":
        self.grid.require_same(other.grid)
        return NodeSet(self.grid, self.mask | other.mask)

    def count(self) -> int:
        return int(self.mask.sum())


def modular(phi: PhiFunction, g: GridFunction) -> float:
    """Weighted sum of Phi(|g|) over the nodes: the quantity the best
    approximation minimizes."""
    return float(np.dot(g.grid.weights, phi(np.abs(g.values))))


def measure(grid: Grid, s: NodeSet) -> float:
    """Total weight of the masked nodes."""
    grid.require_same(s.grid)
    return float(grid.weights[s.mask].sum())


def equality_set(f: GridFunction, p: GridFunction) -> NodeSet:
    """Nodes where f and p agree within the grid's equality tolerance.

    This band plays the role of the exact-equality set {f = P}: exact float
    equality would be meaningless on a grid.
    """
    f.grid.require_same(p.grid)
    eta = f.grid.equality_tol
    return NodeSet(f.grid, np.abs(f.values - p.values) <= eta)
