#!/usr/bin/env python3
"""Timing and accuracy snapshot of the solver across generator families.

For each (generator, dimension, nodes) cell: median solve wall time over a
few random targets, plus the relative gap to a refined exhaustive search.
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from orliczfit import (
    SolverConfig,
    brute_force_oracle,
    make_linear_then_convex_phi,
    make_monomial_subspace,
    make_power_phi,
    make_staircase_phi,
    make_uniform_grid,
    random_smooth_function,
    solve,
)


def refined_oracle(f, s, phi, radius, resolution=33, passes=3):
    box = [(-radius, radius)] * s.dim
    orc = brute_force_oracle(f, s, phi, box, resolution)
    for _ in range(passes - 1):
        cell = [(hi - lo) / (resolution - 1) for lo, hi in box]
        box = [(c - 2 * d, c + 2 * d) for c, d in zip(orc.coeffs, cell)]
        orc = brute_force_oracle(f, s, phi, box, resolution)
    return orc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    phis = {
        "L1": make_power_phi(1.0),
        "L2": make_power_phi(2.0),
        "linconv": make_linear_then_convex_phi(1.0, 1.0, 2.0),
        "stair8": make_staircase_phi(
            make_power_phi(1.0), [(2.0**-n, 1.0) for n in range(1, 9)]
        ),
    }
    print(f"{'phi':10s} {'dim':>3s} {'nodes':>6s} {'median_s':>9s} {'rel_gap':>9s}")
    for phi_name, phi in phis.items():
        for n in (1, 2, 3):
            for nodes in (257, 1025, 2049):
                grid = make_uniform_grid(0.0, 1.0, nodes)
                s = make_monomial_subspace(grid, n)
                rng = np.random.default_rng(args.seed)
                times, gaps = [], []
                for k in range(args.repeats):
                    f = random_smooth_function(grid, rng)
                    cfg = SolverConfig(max_iters=300, n_starts=4, rng_seed=args.seed + k)
                    t0 = time.monotonic()
                    sol = solve(f, s, phi, cfg)
                    times.append(time.monotonic() - t0)
                    orc = refined_oracle(f, s, phi, 2.0 * (1.0 + f.sup_norm()))
                    denom = max(abs(orc.modular_value), 1e-12)
                    gaps.append(abs(sol.modular_value - orc.modular_value) / denom)
                print(
                    f"{phi_name:10s} {n:3d} {nodes:6d} "
                    f"{sorted(times)[len(times) // 2]:9.3f} {max(gaps):9.2e}"
                )
    return 0


if __name__ == "__main__":
    sys.exit(main())
