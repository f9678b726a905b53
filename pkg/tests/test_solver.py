import numpy as np
import pytest

from orliczfit import (
    GridFunction,
    NonFiniteObjectiveError,
    SolverConfig,
    brute_force_oracle,
    evaluate,
    make_hat_subspace,
    make_linear_then_convex_phi,
    make_monomial_subspace,
    make_power_phi,
    make_uniform_grid,
    modular,
    random_smooth_function,
    refine_solution,
    solve,
    solve_all_starts,
)

CFG = SolverConfig(max_iters=300, n_starts=4, rng_seed=11)


class TestSolveKnownMinimizers:
    def test_target_in_span(self, grid01, phi_linconv):
        s = make_monomial_subspace(grid01, 2)
        f = s.basis_function(0)
        sol = solve(f, s, phi_linconv, CFG)
        assert sol.modular_value <= CFG.tol_obj
        assert np.allclose(sol.coeffs, [1.0, 0.0], atol=1e-5)

    def test_l2_constant_is_mean(self, phi_l2):
        g = make_uniform_grid(0.0, 1.0, 2048)
        s = make_monomial_subspace(g, 1)
        f = GridFunction.from_callable(g, lambda x: x)
        sol = solve(f, s, phi_l2, CFG)
        oracle = brute_force_oracle(f, s, phi_l2, [(0.0, 1.0)], 10_000)
        assert sol.coeffs[0] == pytest.approx(0.5, abs=1e-3)
        assert sol.coeffs[0] == pytest.approx(oracle.coeffs[0], abs=1e-3)

    def test_l1_constant_is_median(self, phi_l1):
        g = make_uniform_grid(0.0, 1.0, 2048)
        s = make_monomial_subspace(g, 1)
        f = GridFunction.from_callable(g, lambda x: x)
        sol = solve(f, s, phi_l1, CFG)
        oracle = brute_force_oracle(f, s, phi_l1, [(0.0, 1.0)], 10_000)
        assert sol.coeffs[0] == pytest.approx(0.5, abs=1e-2)
        assert sol.modular_value <= oracle.modular_value + CFG.tol_obj

    def test_modular_value_consistent(self, grid01, phi_l2):
        s = make_monomial_subspace(grid01, 2)
        f = GridFunction.from_callable(grid01, lambda x: np.sin(2 * x))
        sol = solve(f, s, phi_l2, CFG)
        recomputed = modular(phi_l2, f - evaluate(sol.coeffs, s))
        assert abs(sol.modular_value - recomputed) <= 1e-10


class TestBruteForceOracle:
    def test_zero_target(self, grid01, phi_l2):
        s = make_monomial_subspace(grid01, 2)
        f = GridFunction.zero(grid01)
        orc = brute_force_oracle(f, s, phi_l2, [(-1.0, 1.0), (-1.0, 1.0)], 21)
        assert np.allclose(orc.coeffs, 0.0, atol=1e-12)
        assert orc.modular_value == 0.0

    def test_l2_projection_of_square(self, phi_l2):
        # normal equations for span{1, x} against x**2 on [0, 1]:
        # [[1, 1/2], [1/2, 1/3]] c = [1/3, 1/4]  =>  c = (-1/6, 1)
        g = make_uniform_grid(0.0, 1.0, 2048)
        s = make_monomial_subspace(g, 2)
        f = GridFunction.from_callable(g, lambda x: x**2)
        box = [(-1.0, 1.0), (0.0, 2.0)]
        orc = brute_force_oracle(f, s, phi_l2, box, 41)
        for _ in range(3):
            cell = [(hi - lo) / 40 for lo, hi in box]
            box = [(c - 2 * d, c + 2 * d) for c, d in zip(orc.coeffs, cell)]
            orc = brute_force_oracle(f, s, phi_l2, box, 41)
        assert orc.coeffs[0] == pytest.approx(-1.0 / 6.0, abs=1e-3)
        assert orc.coeffs[1] == pytest.approx(1.0, abs=1e-3)

    def test_matches_solve_on_random_instances(self, phi_l1, phi_l2, phi_linconv):
        g = make_uniform_grid(0.0, 1.0, 512)
        rng = np.random.default_rng(77)
        phis = [phi_l1, phi_l2, phi_linconv]
        for i in range(20):
            n = 1 + i % 2
            s = make_monomial_subspace(g, n)
            f = random_smooth_function(g, rng)
            phi = phis[i % 3]
            sol = solve(f, s, phi, SolverConfig(max_iters=300, n_starts=4, rng_seed=i))
            r = 2.0 * (1.0 + f.sup_norm())
            box = [(-r, r)] * n
            orc = brute_force_oracle(f, s, phi, box, 33)
            for _ in range(3):
                cell = [(hi - lo) / 32 for lo, hi in box]
                box = [(c - 2 * d, c + 2 * d) for c, d in zip(orc.coeffs, cell)]
                orc = brute_force_oracle(f, s, phi, box, 33)
            denom = max(abs(orc.modular_value), 1e-12)
            assert abs(sol.modular_value - orc.modular_value) / denom < 1e-2

    def test_dimension_and_resolution_limits(self, grid01, phi_l2):
        s4 = make_monomial_subspace(grid01, 4)
        with pytest.raises(ValueError):
            brute_force_oracle(GridFunction.zero(grid01), s4, phi_l2, [(-1, 1)] * 4, 11)
        s1 = make_monomial_subspace(grid01, 1)
        with pytest.raises(ValueError):
            brute_force_oracle(GridFunction.zero(grid01), s1, phi_l2, [(-1, 1)], 5)


class TestSolverProperties:
    def test_midpoint_of_two_solutions_not_worse(self, grid01, phi_l2):
        s = make_monomial_subspace(grid01, 2)
        f = GridFunction.from_callable(grid01, lambda x: np.cos(3 * x))
        sols = solve_all_starts(f, s, phi_l2, SolverConfig(max_iters=300, n_starts=6, rng_seed=5))
        for a in sols:
            for b in sols:
                mid = 0.5 * (a.coeffs + b.coeffs)
                fmid = modular(phi_l2, f - evaluate(mid, s))
                assert fmid <= max(a.modular_value, b.modular_value) + 1e-10

    def test_oracle_dominance_small_dims(self, phi_l2, phi_l1):
        g = make_uniform_grid(0.0, 1.0, 512)
        rng = np.random.default_rng(3)
        for n, phi in ((1, phi_l1), (2, phi_l2)):
            s = make_monomial_subspace(g, n)
            f = random_smooth_function(g, rng)
            cfg = SolverConfig(max_iters=300, n_starts=4, rng_seed=n)
            sol = solve(f, s, phi, cfg)
            r = 2.0 * (1.0 + f.sup_norm())
            orc = brute_force_oracle(f, s, phi, [(-r, r)] * n, 41)
            assert sol.modular_value <= orc.modular_value + cfg.tol_obj

    def test_scaling_equivariance(self):
        # odd node count keeps the nonsmooth minimizer a unique vertex
        g = make_uniform_grid(0.0, 1.0, 513)
        s = make_monomial_subspace(g, 2)
        f = GridFunction.from_callable(g, lambda x: np.sin(3 * x) + 0.2)
        for p in (1.0, 2.0):
            phi = make_power_phi(p)
            base = solve(f, s, phi, CFG)
            for alpha in (2.0, 0.5):
                scaled = solve(alpha * f, s, phi, CFG)
                assert np.allclose(scaled.coeffs, alpha * base.coeffs, atol=5e-3)
                assert scaled.modular_value == pytest.approx(
                    alpha**p * base.modular_value, rel=1e-6
                )

    def test_best_of_starts_returned(self, grid01, phi_l2):
        s = make_monomial_subspace(grid01, 2)
        f = GridFunction.from_callable(grid01, lambda x: x * (1 - x))
        cfg = SolverConfig(max_iters=300, n_starts=5, rng_seed=9)
        all_sols = solve_all_starts(f, s, phi_l2, cfg)
        best = solve(f, s, phi_l2, cfg)
        assert best.modular_value == min(x.modular_value for x in all_sols)

    def test_refine_toward_rescues_a_stranded_point(self, phi_linconv):
        g = make_uniform_grid(0.0, 1.0, 257)
        s = make_monomial_subspace(g, 2)
        f = GridFunction.from_callable(g, lambda x: np.sin(3 * x) + 0.2)
        cfg = SolverConfig(max_iters=300, n_starts=4, rng_seed=2)
        best = solve(f, s, phi_linconv, cfg)
        # a point displaced along the flat-ish valley: subgradients there
        # are dominated by kink terms, but the segment toward the optimum
        # descends by convexity
        stranded = best.coeffs + np.array([0.02, -0.04])
        stranded_value = modular(phi_linconv, f - evaluate(stranded, s))
        rescued = refine_solution(
            f, s, phi_linconv, cfg, stranded,
            gap_hint=10 * (stranded_value - best.modular_value),
            toward=best.coeffs,
        )
        assert rescued.modular_value <= best.modular_value + cfg.tol_obj
        assert np.linalg.norm(rescued.coeffs - best.coeffs) < 1e-4

    def test_never_worse_than_any_start_point(self, grid01, phi_staircase):
        # the start scheme is seeded Gaussians scaled to sup|f|, so the
        # start points are reproducible here
        s = make_monomial_subspace(grid01, 3)
        f = GridFunction.from_callable(grid01, lambda x: np.sin(4 * x) + 0.3)
        cfg = SolverConfig(max_iters=300, n_starts=6, rng_seed=21)
        sols = solve_all_starts(f, s, phi_staircase, cfg)
        rng = np.random.default_rng(cfg.rng_seed)
        scale = max(1.0, f.sup_norm())
        starts = rng.standard_normal((cfg.n_starts, s.dim)) * scale
        for sol, start in zip(sols, starts):
            start_value = modular(phi_staircase, f - evaluate(start, s))
            assert sol.modular_value <= start_value + 1e-12

    def test_hat_basis_instances(self, grid01, phi_linconv):
        s = make_hat_subspace(grid01, [0.25, 0.75])
        f = GridFunction.from_callable(grid01, lambda x: np.sin(5 * x))
        sol = solve(f, s, phi_linconv, CFG)
        orc = brute_force_oracle(f, s, phi_linconv, [(-3, 3), (-3, 3)], 61)
        assert sol.modular_value <= orc.modular_value + 1e-6


class TestSolverErrors:
    def test_overflow_names_the_node(self, phi_l2):
        g = make_uniform_grid(0.0, 1.0, 16)
        s = make_monomial_subspace(g, 1)
        huge = GridFunction(g, np.full(16, 1e200))
        with pytest.raises(NonFiniteObjectiveError) as err:
            solve(huge, s, make_power_phi(2.0), SolverConfig(rng_seed=0))
        assert err.value.node_index == 0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(max_iters=0)
        with pytest.raises(ValueError):
            SolverConfig(tol_obj=-1.0)
        with pytest.raises(ValueError):
            SolverConfig(n_starts=0)

    def test_nonconvergence_reported_with_tiny_budget(self, grid01, phi_l2):
        s = make_monomial_subspace(grid01, 2)
        f = GridFunction.from_callable(grid01, lambda x: np.exp(x))
        sol = solve(f, s, phi_l2, SolverConfig(max_iters=4, n_starts=2, rng_seed=1))
        assert not sol.converged
