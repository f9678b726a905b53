import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orliczfit import (
    GridFunction,
    Subspace,
    count_sign_changes,
    evaluate,
    make_hat_subspace,
    make_monomial_subspace,
    make_subspace,
    make_uniform_grid,
    one_space_witness,
    subspace_from_csv,
    tchebycheff_probe,
)


class TestMonomialSubspace:
    def test_constant_basis(self, grid01):
        s = make_monomial_subspace(grid01, 1)
        assert s.dim == 1
        assert np.allclose(s.basis[0], 1.0)

    def test_cubic_values(self, grid01):
        s = make_monomial_subspace(grid01, 3)
        assert np.allclose(s.basis[1], grid01.nodes)
        assert np.allclose(s.basis[2], grid01.nodes**2)

    def test_gram_matches_moments(self):
        g = make_uniform_grid(0.0, 1.0, 10_000)
        s = make_monomial_subspace(g, 2)
        expected = np.array([[1.0, 0.5], [0.5, 1.0 / 3.0]])
        assert np.allclose(s.gram, expected, atol=1e-4)

    def test_too_many_elements_rejected(self):
        g = make_uniform_grid(0.0, 1.0, 4)
        with pytest.raises(ValueError):
            make_monomial_subspace(g, 5)


class TestHatSubspace:
    def test_partition_of_unity(self, grid01):
        s = make_hat_subspace(grid01, [0.3, 0.7])
        assert s.dim == 2
        assert np.allclose(s.basis.sum(axis=0), 1.0, atol=1e-12)

    def test_single_knot_peak(self, grid01):
        s = make_hat_subspace(grid01, [0.5])
        assert np.allclose(s.basis[0], 1.0)

    def test_peak_value_at_knot(self):
        g = make_uniform_grid(0.0, 1.0, 1001)
        s = make_hat_subspace(g, [0.25, 0.5, 0.75])
        mid = np.argmin(np.abs(g.nodes - 0.5))
        assert s.basis[1][mid] == pytest.approx(1.0, abs=1e-2)

    def test_gram_nonsingular_five_knots(self):
        g = make_uniform_grid(0.0, 1.0, 1000)
        s = make_hat_subspace(g, [0.1, 0.3, 0.5, 0.7, 0.9])
        svals = np.linalg.svd(s.gram, compute_uv=False)
        assert svals[-1] > 1e-10 * svals[0]

    def test_malformed_knots(self, grid01):
        with pytest.raises(ValueError):
            make_hat_subspace(grid01, [0.7, 0.3])
        with pytest.raises(ValueError):
            make_hat_subspace(grid01, [])
        with pytest.raises(ValueError):
            make_hat_subspace(grid01, [-0.5, 0.5])


class TestEvaluate:
    def test_zero_vector(self, grid01):
        s = make_monomial_subspace(grid01, 3)
        assert np.allclose(evaluate(np.zeros(3), s).values, 0.0)

    def test_unit_vector_selects_basis(self, grid01):
        s = make_monomial_subspace(grid01, 3)
        assert np.array_equal(evaluate(np.array([1.0, 0, 0]), s).values, s.basis[0])

    def test_line_combination(self, grid01):
        s = make_monomial_subspace(grid01, 2)
        got = evaluate(np.array([1.0, -2.0]), s)
        assert np.allclose(got.values, 1.0 - 2.0 * grid01.nodes, atol=1e-14)

    def test_length_mismatch(self, grid01):
        s = make_monomial_subspace(grid01, 2)
        with pytest.raises(ValueError):
            evaluate(np.zeros(3), s)

    @settings(max_examples=30, deadline=None)
    @given(
        st.integers(0, 2**31 - 1),
        st.floats(-3, 3, allow_nan=False),
        st.floats(-3, 3, allow_nan=False),
    )
    def test_linearity(self, seed, alpha, beta):
        s = make_monomial_subspace(make_uniform_grid(0.0, 1.0, 128), 3)
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(3)
        d = rng.standard_normal(3)
        lhs = evaluate(alpha * c + beta * d, s).values
        rhs = alpha * evaluate(c, s).values + beta * evaluate(d, s).values
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestSignChanges:
    def test_plain_alternation(self):
        assert count_sign_changes(np.array([1.0, -1.0, 1.0]), 1e-8) == 2

    def test_zeros_collapse(self):
        assert count_sign_changes(np.array([1.0, 0.0, 0.0, -1.0]), 1e-8) == 1
        assert count_sign_changes(np.array([1.0, 0.0, 1.0]), 1e-8) == 0

    def test_empty_and_tiny(self):
        assert count_sign_changes(np.array([]), 1e-8) == 0
        assert count_sign_changes(np.array([1e-12]), 1e-8) == 0


class TestTchebycheffProbe:
    def test_monomials_pass(self, grid01):
        s = make_monomial_subspace(grid01, 3)
        report = tchebycheff_probe(s, trials=1000, rng_seed=1)
        assert report.tchebycheff_verdict.status == "pass"
        assert report.trials == 1000

    def test_sine_basis_fails_with_witness(self):
        g = make_uniform_grid(0.0, 1.0, 2048)
        s = make_subspace(g, [np.sin(2 * np.pi * g.nodes)], labels=["sin"])
        report = tchebycheff_probe(s, trials=100, rng_seed=0)
        assert report.tchebycheff_verdict.status == "fail"
        witness = report.tchebycheff_verdict.witness
        revalues = witness.coeffs @ s.basis
        assert count_sign_changes(revalues, g.equality_tol) == witness.statistic
        assert witness.statistic >= s.dim

    def test_constant_basis_passes(self, grid01):
        s = make_monomial_subspace(grid01, 1)
        report = tchebycheff_probe(s, trials=50, rng_seed=3)
        assert report.tchebycheff_verdict.status == "pass"

    def test_zero_space_pass_for_hats(self, grid01):
        s = make_hat_subspace(grid01, [0.25, 0.5, 0.75])
        report = tchebycheff_probe(s, trials=200, rng_seed=9)
        assert report.zero_space_verdict.status == "pass"

    def test_requires_trials(self, grid01):
        s = make_monomial_subspace(grid01, 1)
        with pytest.raises(ValueError):
            tchebycheff_probe(s, trials=0)


class TestOneSpaceWitness:
    def test_monomials_contain_constants(self, grid01):
        s = make_monomial_subspace(grid01, 3)
        w = one_space_witness(s)
        assert w is not None
        assert np.min(w @ s.basis) > 0

    def test_hats_sum_to_one(self, grid01):
        s = make_hat_subspace(grid01, [0.2, 0.5, 0.8])
        w = one_space_witness(s)
        assert w is not None
        assert np.min(w @ s.basis) > 0

    def test_pure_slope_positive_at_midpoints(self, grid01):
        s = make_subspace(grid01, [grid01.nodes], labels=["x"])
        w = one_space_witness(s)
        # every midpoint of (0, 1) is positive; the continuum endpoint x=0
        # is invisible to the grid
        assert w is not None
        assert np.min(w @ s.basis) > 0

    def test_odd_function_has_no_witness(self):
        g = make_uniform_grid(-1.0, 1.0, 256)
        s = make_subspace(g, [g.nodes], labels=["x"])
        assert one_space_witness(s) is None


class TestSubspaceValidation:
    def test_dependent_basis_rejected(self, grid01):
        with pytest.raises(ValueError):
            make_subspace(grid01, [grid01.nodes, 2.0 * grid01.nodes])

    def test_csv_round_trip(self, tmp_path):
        g = make_uniform_grid(0.0, 1.0, 64)
        s = make_monomial_subspace(g, 2)
        path = tmp_path / "basis.csv"
        with open(path, "w") as fh:
            fh.write("node,one,x\n")
            for i, x in enumerate(g.nodes):
                fh.write(f"{float(x)!r},{float(s.basis[0][i])!r},{float(s.basis[1][i])!r}\n")
        loaded = subspace_from_csv(g, path)
        assert loaded.labels == ["one", "x"]
        assert np.allclose(loaded.basis, s.basis)
