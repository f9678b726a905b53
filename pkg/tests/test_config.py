import numpy as np
import pytest

from orliczfit import make_linear_then_convex_phi, make_power_phi, make_staircase_phi
from orliczfit.config import (
    ConfigError,
    build_grid,
    build_phi,
    build_solver_config,
    build_subspace,
    build_target,
    load_config,
    phi_to_config,
)


class TestPhiSerialization:
    @pytest.mark.parametrize(
        "phi",
        [
            make_power_phi(2.0),
            make_power_phi(1.0),
            make_power_phi(2.5),
            make_linear_then_convex_phi(1.5, 0.8, 2.0),
            make_staircase_phi(make_power_phi(1.0), [(0.5, 1.0), (0.25, 0.5)]),
        ],
    )
    def test_round_trip_through_pieces(self, phi):
        rebuilt = build_phi(phi_to_config(phi))
        xs = np.linspace(0.0, 3.0, 301)
        assert np.array_equal(rebuilt(xs), phi(xs))
        assert np.array_equal(rebuilt.phi_right(xs), phi.phi_right(xs))

    def test_family_builders(self):
        assert build_phi({"family": "power", "p": 2.0})(3.0) == 9.0
        lc = build_phi({"family": "linear_then_convex", "k": 1.0, "c": 1.0, "p": 2.0})
        assert lc(2.0) == 2.5
        st = build_phi(
            {"family": "staircase", "base": {"family": "power", "p": 1.0}, "jumps": [[0.5, 1.0]]}
        )
        assert st.phi_right(0.5) == 2.0

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            build_phi({"family": "mystery"})

    def test_missing_parameter_names_field(self):
        with pytest.raises(ConfigError, match="phi.p"):
            build_phi({"family": "power"})


class TestOtherBuilders:
    def test_grid_and_subspace(self):
        g = build_grid({"a": 0.0, "b": 1.0, "n_nodes": 64})
        assert g.equality_tol == 1e-8
        s = build_subspace(g, {"family": "monomial", "n": 2})
        assert s.dim == 2
        s2 = build_subspace(g, {"family": "hat", "knots": [0.3, 0.7]})
        assert s2.dim == 2

    def test_targets(self):
        g = build_grid({"a": 0.0, "b": 1.0, "n_nodes": 64})
        poly = build_target(g, {"family": "poly", "coeffs": [1.0, -2.0]})
        assert np.allclose(poly.values, 1.0 - 2.0 * g.nodes)
        step = build_target(g, {"family": "step", "breaks": [0.5], "levels": [-1.0, 1.0]})
        assert set(np.unique(step.values)) == {-1.0, 1.0}
        trig = build_target(g, {"family": "trig", "offset": 0.5, "terms": [[1.0, 2.0, 0.0]]})
        assert trig.values[0] == pytest.approx(
            0.5 + np.sin(2.0 * np.pi * g.nodes[0]), abs=1e-12
        )
        rnd1 = build_target(g, {"family": "random_smooth", "seed": 4})
        rnd2 = build_target(g, {"family": "random_smooth", "seed": 4})
        assert np.array_equal(rnd1.values, rnd2.values)

    def test_step_level_count_checked(self):
        g = build_grid({"a": 0.0, "b": 1.0, "n_nodes": 16})
        with pytest.raises(ConfigError, match="levels"):
            build_target(g, {"family": "step", "breaks": [0.5], "levels": [1.0]})

    def test_solver_config_seed_required(self):
        with pytest.raises(ConfigError, match="rng_seed"):
            build_solver_config({}, require_seed=True)
        cfg = build_solver_config({"rng_seed": 5, "max_iters": 100})
        assert cfg.rng_seed == 5 and cfg.max_iters == 100
        cfg2 = build_solver_config({}, seed_override=9)
        assert cfg2.rng_seed == 9

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("[mystery]\nx = 1\n")
        with pytest.raises(ConfigError, match="mystery"):
            load_config(path)
