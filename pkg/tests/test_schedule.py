import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scorelab.schedule import linear_schedule, tabulated_schedule

SCHED = linear_schedule()


class TestSigmaAt:
    def test_endpoints(self):
        assert SCHED.sigma(0.0) == 0.0
        assert SCHED.sigma(1.0) == pytest.approx(0.995, abs=0)

    def test_linear_midpoint(self):
        assert SCHED.sigma(0.5) == pytest.approx(0.4975, abs=1e-15)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            SCHED.sigma(-0.1)
        with pytest.raises(ValueError):
            SCHED.sigma(1.1)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_vp_identity(self, t):
        assert SCHED.sigma(t) ** 2 + SCHED.alpha(t) ** 2 == pytest.approx(1.0, abs=1e-14)

    def test_bad_construction(self):
        with pytest.raises(ValueError):
            linear_schedule(sigma_max=1.0)
        with pytest.raises(ValueError):
            linear_schedule(sigma_max=0.5, t_min=0.0)


class TestBridgeCoeffs:
    def test_from_clean(self):
        # t_n = 0 recovers the single-shot corruption coefficients
        c1, c2 = SCHED.bridge_coeffs(0.6, 0.0)
        assert c1 == pytest.approx(SCHED.alpha(0.6), abs=1e-15)
        assert c2 == pytest.approx(SCHED.sigma(0.6), abs=1e-15)

    def test_identity_bridge(self):
        c1, c2 = SCHED.bridge_coeffs(0.37, 0.37)
        assert (c1, c2) == (1.0, 0.0)

    def test_frozen_value(self):
        # sigma_t = 0.8, sigma_tn = 0.6 evaluated at high precision
        sched = linear_schedule(sigma_max=0.995)
        t, t_n = 0.8 / 0.995, 0.6 / 0.995
        c1, c2 = sched.bridge_coeffs(t, t_n)
        assert c1 == pytest.approx(0.75, abs=1e-12)
        assert c2 == pytest.approx(0.6614378277661477, abs=1e-12)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            SCHED.bridge_coeffs(0.3, 0.5)

    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_composition_law(self, a, b):
        # noising 0 -> t_n -> t matches the one-shot marginal at t
        t_n, t = min(a, b), max(a, b)
        c1, c2 = SCHED.bridge_coeffs(t, t_n)
        sig_n = SCHED.sigma(t_n)
        composed = math.sqrt(c1**2 * sig_n**2 + c2**2)
        assert composed == pytest.approx(SCHED.sigma(t), abs=1e-12)


class TestTimeGrid:
    def test_two_endpoints(self):
        grid = SCHED.time_grid(1)
        np.testing.assert_allclose(grid, [1.0, SCHED.t_min])

    def test_shape_contract(self):
        grid = SCHED.time_grid(4)
        assert grid.shape == (5,)
        assert grid[0] == 1.0 and grid[-1] == pytest.approx(1e-3)

    def test_strictly_decreasing(self):
        for steps in (1, 2, 7, 100):
            grid = SCHED.time_grid(steps)
            assert np.all(np.diff(grid) < 0)

    def test_zero_steps_rejected(self):
        with pytest.raises(ValueError):
            SCHED.time_grid(0)

    def test_custom_endpoint(self):
        grid = SCHED.time_grid(10, t_end=0.4)
        assert grid[-1] == pytest.approx(0.4)


class TestTabulated:
    def test_matches_linear_interels(self):
        knots = np.linspace(0.0, 1.0, 11)
        sched = tabulated_schedule(knots, 0.995 * knots)
        for t in (0.05, 0.3, 0.77):
            assert sched.sigma(t) == pytest.approx(0.995 * t, abs=1e-12)

    def test_derivative_central_difference(self):
        knots = np.linspace(0.0, 1.0, 101)
        sched = tabulated_schedule(knots, 0.995 * np.array(knots))
        assert sched.dsigma(0.5) == pytest.approx(0.995, rel=1e-6)

    def test_invalid_knots(self):
        with pytest.raises(ValueError):
            tabulated_schedule([0.0, 0.5, 1.0], [0.1, 0.5, 0.995])  # sigma(0) != 0
        with pytest.raises(ValueError):
            tabulated_schedule([0.0, 0.6, 0.5, 1.0], [0.0, 0.3, 0.4, 0.995])


class TestFlowCoeff:
    def test_value(self):
        t = 0.5
        s, ds = SCHED.sigma(t), SCHED.dsigma(t)
        assert SCHED.flow_coeff(t) == pytest.approx(s * ds / (1 - s * s), rel=1e-14)
