#!/usr/bin/env python3
"""Empirical uniqueness studies over the main generator families.

Three studies:
  tchebycheff   monomial spaces under strictly convex and affine-headed
                generators: every probe should come out singleton
  jump          staircase generator (jumps accumulating at 0) over a hat
                1-space, with a flat-generator control instance that shows
                genuine multiplicity on an even grid
  witness       the affine-head non-uniqueness construction: a whole ray
                of equally good approximations, each certified

Writes summary.csv and summary.json into --out and prints a verdict table.
"""

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from orliczfit import (
    GridFunction,
    SolverConfig,
    build_nonuniq_witness,
    check_characterization,
    evaluate,
    jump_phi_uniqueness_suite,
    make_hat_subspace,
    make_linear_then_convex_phi,
    make_monomial_subspace,
    make_power_phi,
    make_staircase_phi,
    make_uniform_grid,
    random_smooth_function,
    uniqueness_probe,
)


def study_tchebycheff(args, rows):
    grid = make_uniform_grid(0.0, 1.0, args.nodes)
    phis = {
        "power2": make_power_phi(2.0),
        "linear_then_convex": make_linear_then_convex_phi(1.0, 1.0, 2.0),
    }
    rng = np.random.default_rng(args.seed)
    for phi_name, phi in phis.items():
        for n in (1, 2, 3):
            s = make_monomial_subspace(grid, n)
            for k in range(args.instances):
                f = random_smooth_function(grid, rng)
                rep = uniqueness_probe(
                    f,
                    s,
                    phi,
                    cfg=SolverConfig(max_iters=300, rng_seed=args.seed + k),
                    n_starts=args.starts,
                    instance=f"tcheb/{phi_name}/n{n}/{k}",
                    theorem_tag="tchebycheff-uniqueness",
                )
                rows.append(rep)


def study_jump(args, rows):
    grid = make_uniform_grid(0.0, 1.0, args.nodes)
    stair = make_staircase_phi(make_power_phi(1.0), [(2.0**-n, 1.0) for n in range(1, 9)])
    hats = make_hat_subspace(grid, [0.2, 0.4, 0.6, 0.8])
    rows.extend(
        jump_phi_uniqueness_suite(
            hats,
            stair,
            args.instances,
            rng_seed=args.seed,
            cfg=SolverConfig(max_iters=300, rng_seed=args.seed),
            n_starts=args.starts,
        )
    )
    # control: flat generator, even grid, median plateau
    even = make_uniform_grid(0.0, 1.0, args.nodes + (args.nodes % 2 == 1))
    control_f = GridFunction(even, np.where(even.nodes < 0.5, -1.0, 1.0))
    rows.append(
        uniqueness_probe(
            control_f,
            make_hat_subspace(even, [0.5]),
            make_power_phi(1.0),
            cfg=SolverConfig(max_iters=300, rng_seed=args.seed),
            n_starts=args.starts,
            instance="jump/control-median-plateau",
            theorem_tag="l1-control",
        )
    )


def study_witness(args):
    phi = make_linear_then_convex_phi(1.0, 1.0, 2.0)
    grid = make_uniform_grid(0.0, 1.0, 2048)
    s = make_monomial_subspace(grid, 2)
    x = grid.nodes
    sign = np.where((x < 0.25) | (x >= 0.75), 1.0, -1.0)
    f = GridFunction(grid, 0.4 * sign)
    p1 = GridFunction.zero(grid)
    witness = build_nonuniq_witness(s, phi, np.array([0.3, 0.0]), f, p1)
    certified = all(
        check_characterization(witness.h, evaluate(e * witness.p3, s), s, phi, 1e-8).verdict
        for e in witness.epsilons
    )
    return {"modular_gap": witness.modular_gap, "all_certified": certified}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="experiments_out")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--instances", type=int, default=10)
    parser.add_argument("--starts", type=int, default=16)
    parser.add_argument("--nodes", type=int, default=257)
    args = parser.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    t0 = time.monotonic()
    rows = []
    study_tchebycheff(args, rows)
    study_jump(args, rows)
    witness_summary = study_witness(args)
    elapsed = time.monotonic() - t0

    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "theorem_tag", "verdict", "diameter"])
        for rep in rows:
            writer.writerow(
                [rep.instance, rep.theorem_tag, rep.verdict.kind, repr(rep.verdict.diameter or 0.0)]
            )
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(
            {
                "reports": [r.to_json_dict() for r in rows],
                "witness": witness_summary,
                "seed": args.seed,
            },
            fh,
            sort_keys=True,
            indent=2,
        )

    counts = {}
    for rep in rows:
        key = (rep.theorem_tag, rep.verdict.kind)
        counts[key] = counts.get(key, 0) + 1
    print(f"{len(rows)} probes in {elapsed:.1f}s -> {args.out}")
    for (tag, verdict), count in sorted(counts.items()):
        print(f"  {tag:28s} {verdict:12s} {count}")
    print(
        f"  witness: modular_gap={witness_summary['modular_gap']:.2e} "
        f"all_certified={witness_summary['all_certified']}"
    )
    bad = sum(
        1
        for rep in rows
        if rep.verdict.kind != ("multiple" if rep.theorem_tag == "l1-control" else "singleton")
    )
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
