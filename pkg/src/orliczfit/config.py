"""Declarative experiment configs (TOML) with strict field validation.

Unknown fields are rejected by name so a mistyped tolerance can never be
silently ignored.  All randomized commands require an explicit seed in the
config (or the --seed override); outputs embed the resolved config, so a
run is reproducible from its own artifacts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .grids import Grid, GridFunction, make_uniform_grid
from .phi import Generator, PhiFunction, Piece, make_linear_then_convex_phi, make_power_phi, make_staircase_phi
from .solver import SolverConfig
from .subspaces import Subspace, make_hat_subspace, make_monomial_subspace, subspace_from_csv

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "build_phi",
    "build_grid",
    "build_subspace",
    "build_target",
    "build_solver_config",
    "phi_to_config",
]


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field [{field}]: {message}")


_SECTIONS = {
    "phi": {"family", "p", "k", "c", "jumps", "base", "pieces"},
    "grid": {"a", "b", "n_nodes", "equality_tol"},
    "subspace": {"family", "n", "knots", "path"},
    "target": {"family", "coeffs", "terms", "offset", "breaks", "levels", "seed", "path"},
    "solver": {"max_iters", "step_init", "tol_obj", "tol_coeff", "n_starts", "rng_seed"},
    "certify": {"coeffs", "tol", "n_random", "rng_seed"},
    "unique": {"n_starts", "theorem_tag", "suite_instances", "certify_tol"},
    "witness": {"p1_coeffs", "p3_coeffs", "epsilons"},
}


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    raw: dict
    path: str

    def section(self, name: str, required: bool = False) -> dict:
        sec = self.raw.get(name)
        if sec is None:
            if required:
                raise ConfigError(name, "section is required for this command")
            return {}
        return sec


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"not valid TOML: {exc}")
    for section, content in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        if not isinstance(content, dict):
            raise ConfigError(section, "must be a table")
        for key in content:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}", "unknown field")
    base = os.path.dirname(os.path.abspath(path))
    for section, key in (("subspace", "path"), ("target", "path")):
        sec = raw.get(section, {})
        if "path" in sec:
            resolved = os.path.join(base, sec["path"])
            if not os.path.exists(resolved):
                raise ConfigError(f"{section}.{key}", f"file not found: {sec['path']}")
            sec["path"] = resolved
    return ExperimentConfig(raw=raw, path=str(path))


def _require(section: dict, name: str, field: str):
    if name not in section:
        raise ConfigError(f"{field}.{name}", "missing required field")
    return section[name]


def build_phi(section: dict) -> PhiFunction:
    family = _require(section, "family", "phi")
    if family == "power":
        return make_power_phi(float(_require(section, "p", "phi")))
    if family == "linear_then_convex":
        return make_linear_then_convex_phi(
            float(_require(section, "k", "phi")),
            float(_require(section, "c", "phi")),
            float(_require(section, "p", "phi")),
        )
    if family == "staircase":
        base = build_phi(_require(section, "base", "phi"))
        jumps = [(float(a), float(sz)) for a, sz in _require(section, "jumps", "phi")]
        return make_staircase_phi(base, jumps)
    if family == "pieces":
        pieces = []
        for entry in _require(section, "pieces", "phi"):
            pieces.append(
                Piece(
                    lo=float(entry["lo"]),
                    shift=float(entry.get("shift", entry["lo"])),
                    coefs=tuple(float(v) for v in entry["coefs"]),
                    exps=tuple(float(v) for v in entry["exps"]),
                )
            )
        return PhiFunction(Generator(pieces))
    raise ConfigError("phi.family", f"unknown family {family!r}")


def phi_to_config(phi: PhiFunction) -> dict:
    """Explicit piece-list serialization; build_phi inverts it exactly."""
    return {
        "family": "pieces",
        "pieces": [
            {
                "lo": p.lo,
                "shift": p.shift,
                "coefs": list(p.coefs),
                "exps": list(p.exps),
            }
            for p in phi.generator.pieces
        ],
    }


def build_grid(section: dict) -> Grid:
    a = float(_require(section, "a", "grid"))
    b = float(_require(section, "b", "grid"))
    n_nodes = int(_require(section, "n_nodes", "grid"))
    equality_tol = float(section.get("equality_tol", 1e-8))
    try:
        return make_uniform_grid(a, b, n_nodes, equality_tol)
    except ValueError as exc:
        raise ConfigError("grid", str(exc))


def build_subspace(grid: Grid, section: dict) -> Subspace:
    family = _require(section, "family", "subspace")
    try:
        if family == "monomial":
            return make_monomial_subspace(grid, int(_require(section, "n", "subspace")))
        if family == "hat":
            return make_hat_subspace(grid, _require(section, "knots", "subspace"))
        if family == "csv":
            return subspace_from_csv(grid, _require(section, "path", "subspace"))
    except ValueError as exc:
        raise ConfigError("subspace", str(exc))
    raise ConfigError("subspace.family", f"unknown family {family!r}")


def build_target(grid: Grid, section: dict) -> GridFunction:
    family = _require(section, "family", "target")
    x = grid.nodes
    u = (x - grid.a) / (grid.b - grid.a)
    if family == "poly":
        coeffs = [float(v) for v in _require(section, "coeffs", "target")]
        values = np.zeros_like(x)
        for j, cj in enumerate(coeffs):
            values = values + cj * x**j
        return GridFunction(grid, values)
    if family == "trig":
        values = np.full_like(x, float(section.get("offset", 0.0)))
        for amp, k, phase in _require(section, "terms", "target"):
            values = values + float(amp) * np.sin(float(k) * np.pi * u + float(phase))
        return GridFunction(grid, values)
    if family == "step":
        breaks = [float(v) for v in _require(section, "breaks", "target")]
        levels = [float(v) for v in _require(section, "levels", "target")]
        if len(levels) != len(breaks) + 1:
            raise ConfigError("target.levels", "need exactly one more level than breaks")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise ConfigError("target.breaks", "breaks must be strictly increasing")
        idx = np.searchsorted(np.asarray(breaks), x, side="right")
        return GridFunction(grid, np.asarray(levels, dtype=float)[idx])
    if family == "random_smooth":
        from .uniqueness import random_smooth_function

        seed = int(_require(section, "seed", "target"))
        return random_smooth_function(grid, np.random.default_rng(seed))
    if family == "csv":
        return GridFunction.from_csv(grid, _require(section, "path", "target"))
    raise ConfigError("target.family", f"unknown family {family!r}")


def build_solver_config(
    section: dict, seed_override: Optional[int] = None, require_seed: bool = True
) -> SolverConfig:
    seed: Any = section.get("rng_seed")
    if seed_override is not None:
        seed = seed_override
    if seed is None:
        if require_seed:
            raise ConfigError(
                "solver.rng_seed", "a seed is mandatory for randomized commands"
            )
        seed = 0
    defaults = SolverConfig()
    try:
        return SolverConfig(
            max_iters=int(section.get("max_iters", defaults.max_iters)),
            step_init=float(section.get("step_init", defaults.step_init)),
            tol_obj=float(section.get("tol_obj", defaults.tol_obj)),
            tol_coeff=float(section.get("tol_coeff", defaults.tol_coeff)),
            n_starts=int(section.get("n_starts", defaults.n_starts)),
            rng_seed=int(seed),
        )
    except ValueError as exc:
        raise ConfigError("solver", str(exc))
