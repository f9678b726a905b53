"""Batch experiment runner.

Subcommands: solve, certify, unique, witness.  Each reads one TOML config,
writes JSON (and CSV where tabular) into the output directory, and exits
0 on success, 1 on config or precondition errors, 2 on non-convergence or
inconclusive verdicts, 3 on a failed certificate.  Identical config and
seed give byte-identical outputs apart from the build-info block.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .certificates import check_characterization
from .grids import modular
from .config import (
    ConfigError,
    ExperimentConfig,
    build_grid,
    build_phi,
    build_solver_config,
    build_subspace,
    build_target,
    load_config,
)
from .solver import NonFiniteObjectiveError, solve
from .subspaces import evaluate
from .uniqueness import (
    WitnessPreconditionError,
    build_nonuniq_witness,
    jump_phi_uniqueness_suite,
    uniqueness_probe,
)

__all__ = ["main", "cmd_solve", "cmd_certify", "cmd_unique", "cmd_witness"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_CERT_FAILED = 3


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(out_dir: str, name: str, payload: dict, config: ExperimentConfig):
    payload = dict(payload)
    payload["config"] = config.raw
    payload["build_info"] = {"package": "orliczfit", "version": __version__}
    _atomic_write(os.path.join(out_dir, name), json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_csv(out_dir: str, name: str, header: list[str], rows):
    path = os.path.join(out_dir, name)
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _build_instance(config: ExperimentConfig):
    grid = build_grid(config.section("grid", required=True))
    phi = build_phi(config.section("phi", required=True))
    subspace = build_subspace(grid, config.section("subspace", required=True))
    target = build_target(grid, config.section("target", required=True))
    return grid, phi, subspace, target


def cmd_solve(config: ExperimentConfig, out_dir: str, seed: int | None, quiet: bool) -> int:
    grid, phi, subspace, target = _build_instance(config)
    cfg = build_solver_config(config.section("solver"), seed_override=seed)
    solution = solve(target, subspace, phi, cfg)
    approx = evaluate(solution.coeffs, subspace)
    _write_json(out_dir, "solution.json", {"solution": solution.to_json_dict()}, config)
    _write_csv(
        out_dir,
        "residuals.csv",
        ["node", "f", "P", "residual"],
        (
            [repr(float(x)), repr(float(fv)), repr(float(pv)), repr(float(fv - pv))]
            for x, fv, pv in zip(grid.nodes, target.values, approx.values)
        ),
    )
    if not quiet:
        print(
            f"solve: modular={solution.modular_value:.6e} "
            f"converged={solution.converged} -> {out_dir}"
        )
    return EXIT_OK if solution.converged else EXIT_NOT_CONVERGED


def cmd_certify(config: ExperimentConfig, out_dir: str, seed: int | None, quiet: bool) -> int:
    grid, phi, subspace, target = _build_instance(config)
    section = config.section("certify", required=True)
    if "coeffs" not in section:
        raise ConfigError("certify.coeffs", "missing required field")
    coeffs = np.asarray([float(v) for v in section["coeffs"]])
    if coeffs.shape != (subspace.dim,):
        raise ConfigError("certify.coeffs", f"expected {subspace.dim} coefficients")
    n_random = int(section.get("n_random", 8))
    rng_seed = seed if seed is not None else section.get("rng_seed")
    if rng_seed is None and n_random > 0:
        raise ConfigError("certify.rng_seed", "a seed is mandatory for randomized commands")
    p = evaluate(coeffs, subspace)
    tol = section.get("tol")
    if tol is None:
        tol = 1e-4 * (1.0 + modular(phi, target - p))
    cert = check_characterization(
        target, p, subspace, phi, float(tol), n_random=n_random, rng_seed=int(rng_seed or 0)
    )
    _write_json(out_dir, "certificate.json", {"certificate": cert.to_json_dict()}, config)
    if not quiet:
        print(
            f"certify: verdict={cert.verdict} worst_margin={cert.worst_margin:.3e} -> {out_dir}"
        )
    return EXIT_OK if cert.verdict else EXIT_CERT_FAILED


def cmd_unique(config: ExperimentConfig, out_dir: str, seed: int | None, quiet: bool) -> int:
    grid, phi, subspace, target = _build_instance(config)
    cfg = build_solver_config(config.section("solver"), seed_override=seed)
    section = config.section("unique")
    n_starts = int(section.get("n_starts", 16))
    theorem_tag = str(section.get("theorem_tag", ""))
    certify_tol = section.get("certify_tol")
    suite_n = section.get("suite_instances")
    if suite_n is not None:
        reports = jump_phi_uniqueness_suite(
            subspace,
            phi,
            int(suite_n),
            cfg.rng_seed,
            cfg=cfg,
            n_starts=n_starts,
            theorem_tag=theorem_tag or "jump-generator-singleton",
        )
        _write_json(
            out_dir,
            "uniqueness.json",
            {"reports": [r.to_json_dict() for r in reports]},
            config,
        )
        _write_csv(
            out_dir,
            "uniqueness_summary.csv",
            ["instance", "theorem_tag", "verdict", "diameter"],
            (
                [r.instance, r.theorem_tag, r.verdict.kind, repr(r.verdict.diameter or 0.0)]
                for r in reports
            ),
        )
        bad = sum(1 for r in reports if r.verdict.kind == "inconclusive")
        if not quiet:
            kinds = [r.verdict.kind for r in reports]
            print(f"unique suite: {len(reports)} instances, verdicts={kinds} -> {out_dir}")
        return EXIT_NOT_CONVERGED if bad else EXIT_OK
    report = uniqueness_probe(
        target,
        subspace,
        phi,
        cfg=cfg,
        n_starts=n_starts,
        instance=os.path.basename(config.path),
        theorem_tag=theorem_tag,
        certify_tol=None if certify_tol is None else float(certify_tol),
    )
    _write_json(out_dir, "uniqueness.json", {"report": report.to_json_dict()}, config)
    if not quiet:
        print(f"unique: verdict={report.verdict.kind} -> {out_dir}")
    return EXIT_NOT_CONVERGED if report.verdict.kind == "inconclusive" else EXIT_OK


def cmd_witness(config: ExperimentConfig, out_dir: str, seed: int | None, quiet: bool) -> int:
    grid, phi, subspace, target = _build_instance(config)
    section = config.section("witness", required=True)
    p1_coeffs = np.asarray([float(v) for v in section.get("p1_coeffs", [0.0] * subspace.dim)])
    if "p3_coeffs" not in section:
        raise ConfigError("witness.p3_coeffs", "missing required field")
    p3_coeffs = np.asarray([float(v) for v in section["p3_coeffs"]])
    epsilons = section.get("epsilons", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    p1 = evaluate(p1_coeffs, subspace)
    witness = build_nonuniq_witness(
        subspace, phi, p3_coeffs, target, p1, epsilons=[float(e) for e in epsilons]
    )
    _write_json(out_dir, "witness.json", {"witness": witness.to_json_dict()}, config)
    if not quiet:
        print(f"witness: modular_gap={witness.modular_gap:.3e} -> {out_dir}")
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "certify": cmd_certify,
    "unique": cmd_unique,
    "witness": cmd_witness,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="orliczfit",
        description="Best Phi-approximation experiments over declarative configs.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to a TOML experiment config")
    parser.add_argument("--out", default=None, help="output directory (default ./out)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary line")
    args = parser.parse_args(argv)

    out_dir = args.out or os.environ.get("ORLICZFIT_OUT") or "out"
    try:
        config = load_config(args.config)
        if args.seed is not None:
            # outputs embed the config; record the override so a rerun from
            # the embedded config reproduces this run
            config.raw.setdefault("solver", {})["rng_seed"] = args.seed
            if args.command == "certify":
                config.raw.setdefault("certify", {})["rng_seed"] = args.seed
        os.makedirs(out_dir, exist_ok=True)
        return _COMMANDS[args.command](config, out_dir, args.seed, args.quiet)
    except (ConfigError, WitnessPreconditionError, NonFiniteObjectiveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
