import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from superfringe import binning as bn

half_widths = st.floats(min_value=0.05, max_value=2.0)
photons = st.floats(min_value=0.5, max_value=400.0)
phases = st.floats(min_value=-math.pi, max_value=math.pi)


@st.composite
def multi_schemes(draw):
    a = draw(half_widths)
    b = draw(st.floats(min_value=2.0 * a * 1.01 + 1e-6, max_value=2.0 * a + 6.0))
    n = draw(st.sampled_from([1, 3, 5, 7, 9]))
    return bn.MultiScheme(a, b, n)


class TestSchemes:
    def test_binary_validation(self):
        for bad in (0.0, -1.0, math.inf):
            with pytest.raises(ValueError):
                bn.BinaryScheme(bad)

    @pytest.mark.parametrize("args", [(0.5, 1.0, 3), (0.5, 0.9, 3), (0.5, 3.0, 4), (0.5, 3.0, 0), (0.5, math.nan, 3)])
    def test_multi_validation(self, args):
        with pytest.raises(ValueError):
            bn.MultiScheme(*args)

    def test_centres(self):
        s = bn.MultiScheme(0.5, 3.17, 5)
        np.testing.assert_allclose(s.centers, [-6.34, -3.17, 0.0, 3.17, 6.34])
        assert s.intervals()[2] == (-0.5, 0.5)

    def test_eigenvalue(self):
        assert bn.BinaryScheme(0.5).lam0 == pytest.approx(1.0 / math.erf(math.sqrt(2) * 0.5), rel=1e-15)
        assert bn.BinaryScheme(0.5).lam0 == pytest.approx(oracles.lambda0(0.5), rel=1e-13)

    def test_typed_entry_points(self):
        with pytest.raises(TypeError):
            bn.response_binary(bn.MultiScheme(0.5, 3.0, 3), 19, 0.0)
        with pytest.raises(TypeError):
            bn.response_multi(bn.BinaryScheme(0.5), 19, 0.0)


class TestResponse:
    def test_top_of_binary_fringe(self):
        assert bn.response(bn.BinaryScheme(0.5), 19, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_fig2a_values(self):
        s = bn.BinaryScheme(0.5)
        # brute-force integration of the window mass, scaled by the eigenvalue
        for phi in (0.2, 0.5, 1.1, math.pi / 2):
            assert bn.response(s, 19, phi) == pytest.approx(oracles.response(0.5, [0.0], 19, phi), rel=1e-11, abs=1e-14)

    @given(multi_schemes(), photons, phases)
    @settings(max_examples=60, deadline=None)
    def test_matches_integration_oracle(self, scheme, n, phi):
        centres = list(scheme.centers)
        ref = oracles.response(scheme.a, centres, n, phi)
        assert bn.response(scheme, n, phi) == pytest.approx(ref, rel=1e-10, abs=1e-13)
        vref = oracles.variance(scheme.a, centres, n, phi)
        assert bn.variance(scheme, n, phi) == pytest.approx(vref, rel=1e-9, abs=1e-12)

    @given(half_widths, st.floats(0.1, 6.0), photons, phases)
    @settings(max_examples=60, deadline=None)
    def test_single_bin_comb_is_binary(self, a, extra, n, phi):
        multi = bn.MultiScheme(a, 2 * a + extra, 1)
        assert bn.response(multi, n, phi) == pytest.approx(bn.response(bn.BinaryScheme(a), n, phi), abs=1e-12)

    @given(multi_schemes(), photons, phases)
    @settings(max_examples=80, deadline=None)
    def test_bounded_by_eigenvalue(self, scheme, n, phi):
        r = bn.response(scheme, n, phi)
        assert 0.0 <= r <= scheme.lam0 * (1 + 1e-15)
        assert bn.variance(scheme, n, phi) >= -1e-15

    def test_leakage_lifts_comb_peak_above_one(self):
        # neighbouring windows catch tail mass, so the comb can exceed one
        peak = bn.response(bn.MultiScheme(0.5, 3.17, 5), 139, 0.0)
        assert 1.0 < peak < bn.MultiScheme(0.5, 3.17, 5).lam0

    @given(multi_schemes(), photons, phases)
    @settings(max_examples=60, deadline=None)
    def test_even_and_period_pi_symmetry(self, scheme, n, phi):
        r = bn.response(scheme, n, phi)
        assert bn.response(scheme, n, -phi) == pytest.approx(r, abs=1e-13)
        assert bn.response(scheme, n, math.pi - phi) == pytest.approx(r, abs=1e-13)
        assert bn.response(scheme, n, phi + 2 * math.pi) == pytest.approx(r, abs=1e-12)

    def test_vanishing_window_limit(self):
        phi = np.linspace(-math.pi, math.pi, 65)
        np.testing.assert_allclose(bn.response(bn.BinaryScheme(1e-6), 132, phi), bn.response_a0(132, phi), rtol=1e-9)

    def test_vectorised_shape(self):
        phi = np.zeros((3, 4))
        assert bn.response(bn.BinaryScheme(0.5), 19, phi).shape == (3, 4)
        assert isinstance(bn.response(bn.BinaryScheme(0.5), 19, 0.1), float)


class TestDerivative:
    @given(multi_schemes(), photons, st.floats(0.05, 1.5))
    @settings(max_examples=60, deadline=None)
    def test_finite_difference(self, scheme, n, phi):
        h = 1e-5
        fd = (bn.response(scheme, n, phi + h) - bn.response(scheme, n, phi - h)) / (2 * h)
        exact = bn.response_derivative(scheme, n, phi)
        assert exact == pytest.approx(fd, rel=1e-4, abs=1e-7)

    def test_zero_at_origin(self):
        assert abs(bn.response_derivative(bn.MultiScheme(0.5, 3.17, 5), 139, 0.0)) < 1e-15


class TestSensitivity:
    def test_undefined_at_fringe_top(self):
        assert bn.sensitivity(bn.BinaryScheme(0.5), 19, 0.0) == math.inf
        assert bn.sensitivity(bn.BinaryScheme(0.5), 19, math.pi / 2) == math.inf

    def test_undefined_without_light(self):
        assert bn.sensitivity(bn.BinaryScheme(0.5), 0.0, 0.3) == math.inf

    def test_undefined_where_nothing_accepted(self):
        assert bn.sensitivity(bn.BinaryScheme(0.5), 1e6, 1.2) == math.inf

    @given(multi_schemes(), photons, phases, st.floats(0.1, 10.0))
    @settings(max_examples=60, deadline=None)
    def test_independent_of_eigenvalue(self, scheme, n, phi, scale):
        base = bn.sensitivity(scheme, n, phi)
        scaled = bn.sensitivity(scheme, n, phi, eigenvalue_scale=scale)
        if math.isinf(base):
            assert math.isinf(scaled)
        else:
            assert scaled == pytest.approx(base, rel=1e-12)
            assert bn.sensitivity_from_probability(scheme, n, phi) == pytest.approx(base, rel=1e-12)

    def test_matches_error_propagation(self):
        s, n, phi = bn.MultiScheme(0.5, 3.17, 5), 139, 0.37
        expected = math.sqrt(bn.variance(s, n, phi)) / abs(bn.response_derivative(s, n, phi))
        assert bn.sensitivity(s, n, phi) == pytest.approx(expected, rel=1e-13)

    def test_binary_minimum_scaling(self):
        best = bn.min_sensitivity(bn.BinaryScheme(0.5), 1e4)
        assert 1.36 <= best.min_sensitivity * 100 <= 1.39

    def test_closed_form_limit(self):
        limit = math.sqrt(math.sqrt(math.e * math.pi / 2) - 1)
        assert bn.sensitivity_min_closed_form(1e12).delta_phi_min * 1e6 == pytest.approx(limit, rel=1e-9)

    def test_closed_form_phase_scaling(self):
        ns = np.array([1e3, 1e4, 1e5])
        phis = [bn.sensitivity_min_closed_form(n).phi_min for n in ns]
        slope = np.polyfit(np.log(ns), np.log(phis), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.02)

    def test_closed_form_small_n_regression(self):
        got = bn.sensitivity_min_closed_form(4.0)
        root = math.sqrt(20.0)
        delta = math.sqrt(math.sqrt(math.pi / 2) * (math.exp((6 - root) / 4) - math.sqrt(2 / math.pi)) / (root - 2))
        phi = math.acos(math.sqrt(0.5 - 0.25 + root / 8))
        assert got.delta_phi_min == pytest.approx(delta, rel=1e-14)
        assert got.phi_min == pytest.approx(phi, rel=1e-12)

    def test_closed_form_rejects_no_light(self):
        with pytest.raises(ValueError):
            bn.sensitivity_min_closed_form(0.0)

    def test_finite_window_closed_form_runs(self):
        out = bn.sensitivity_finite_a_closed_form(bn.BinaryScheme(0.5), 19, np.array([0.2, 0.4]))
        assert out.shape == (2,)


class TestFwhm:
    def test_closed_form_value(self):
        assert bn.fwhm(None, 132) == pytest.approx(2 * math.asin(math.sqrt(2 * math.log(2) / 132)), rel=1e-15)
        assert bn.fwhm(None, 132) == pytest.approx(0.205321, abs=1e-6)

    def test_threshold(self):
        assert bn.fwhm_closed_form(bn.SUPER_RESOLUTION_THRESHOLD) == pytest.approx(math.pi, rel=1e-12)
        with pytest.raises(ValueError):
            bn.fwhm_closed_form(1.0)

    def test_numeric_agrees_with_closed_form(self):
        for n in (132.0, 1e4):
            assert bn.fwhm_a0_numeric(n) == pytest.approx(bn.fwhm_closed_form(n), abs=1e-9)

    @pytest.mark.parametrize("n", [4.0, 19.0])
    def test_numeric_uses_trough_referenced_half_level(self, n):
        # the trough exp(-N/2) lifts the half level above 1/2 for small N
        half = 0.5 * (1.0 + math.exp(-n / 2))
        expected = 2 * math.asin(math.sqrt(-2 * math.log(half) / n))
        assert bn.fwhm_a0_numeric(n) == pytest.approx(expected, abs=1e-9)
        assert bn.fwhm_a0_numeric(n) < bn.fwhm_closed_form(n)

    def test_small_window_agrees_with_closed_form(self):
        assert bn.fwhm(bn.BinaryScheme(1e-6), 132) == pytest.approx(bn.fwhm_closed_form(132), abs=1e-8)

    def test_finite_window_value(self):
        assert bn.fwhm(bn.BinaryScheme(0.5), 132) == pytest.approx(0.241804, abs=1e-5)

    def test_monotone_narrowing(self):
        ns = [2.0, 5.0, 19.0, 50.0, 132.0, 500.0, 2000.0]
        widths = [bn.fwhm(bn.BinaryScheme(0.5), n) for n in ns]
        assert all(w2 < w1 for w1, w2 in zip(widths, widths[1:]))
        closed = [bn.fwhm_closed_form(n) for n in ns]
        assert all(c2 < c1 for c1, c2 in zip(closed, closed[1:]))

    def test_flat_curve_rejected(self):
        with pytest.raises(ValueError):
            bn.fwhm_of_curve(lambda p: np.ones_like(p))


class TestFringes:
    def test_binary_two_fringes(self):
        assert bn.count_fringes(bn.BinaryScheme(0.5), 19) == 2

    def test_binary_visibility(self):
        vis = bn.visibility(bn.BinaryScheme(0.5), 19)
        trough = bn.response(bn.BinaryScheme(0.5), 19, math.pi / 2)
        assert vis.minimum == pytest.approx((1 - trough) / (1 + trough), rel=1e-9)
        assert vis.minimum == pytest.approx(0.998855, abs=1e-6)

    def test_fig3_comb_has_eight_fringes(self):
        assert bn.count_fringes(bn.MultiScheme(0.5, 3.17, 5), 139) == 8

    def test_fig3_comb_visibility_values(self):
        vis = bn.visibility(bn.MultiScheme(0.5, 3.17, 5), 139)
        assert vis.fringe_count == 8
        assert vis.minimum == pytest.approx(0.8899, abs=2e-4)
        assert vis.mean == pytest.approx(0.9094, abs=2e-4)

    def test_unreachable_outer_windows(self):
        # sqrt(19)/2 < 2.5, so the outer pair never sees the mean
        assert bn.count_fringes(bn.MultiScheme(0.5, 5.0, 3), 19) == 2

    def test_fringe_positions_in_period(self):
        found = bn.fringes(bn.MultiScheme(0.5, 3.17, 5), 139)
        for f in found:
            assert 0.0 <= f.phi < 2 * math.pi
            assert 0.0 < f.visibility <= 1.0

    def test_vanishing_light_has_no_fringes(self):
        assert bn.count_fringes(bn.BinaryScheme(0.5), 0.0) == 0


class TestSummary:
    def test_keys(self):
        summary = bn.summarize(bn.BinaryScheme(0.5), 19).to_dict()
        assert set(summary) >= {"fwhm", "visibility", "visibility_mean", "fringe_count", "min_sensitivity", "phi_at_min"}
        assert summary["fringe_count"] == 2


class TestOptimizer:
    def test_spacing_grid_range(self):
        grid = bn.spacing_grid(100.0, 0.5, 20)
        assert grid[0] > 1.0
        assert grid[-1] == pytest.approx(5.0 + 1.5)

    def test_bin_counts(self):
        assert bn._bin_counts(5.0, 3.0) == [3, 5]
        assert bn._bin_counts(5.0, 1.1) == [7, 9, 11]

    def test_small_n_falls_back_to_binary(self):
        res = bn.optimize_spacing(1.0, 0.5, 0.95, n_coarse=20)
        assert res.M == 2
        assert res.n_bins == 1
        assert isinstance(res.scheme(0.5), bn.BinaryScheme)

    def test_result_is_feasible(self):
        res = bn.optimize_spacing(50.0, 0.5, 0.9, n_coarse=40)
        assert res.M > 2
        assert res.visibility >= 0.9
        vis = bn.visibility(res.scheme(0.5), 50.0)
        assert vis.fringe_count == res.M
        assert vis.minimum == pytest.approx(res.visibility, abs=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            bn.optimize_spacing(0.0)
        with pytest.raises(ValueError):
            bn.optimize_spacing(10.0, visibility_threshold=1.0)

    def test_power_law_fit(self):
        x = np.array([1.0, 2.0, 4.0, 8.0])
        p, c = bn.fit_power_law(x, 3.0 * x**0.5)
        assert p == pytest.approx(0.5, abs=1e-12)
        assert c == pytest.approx(3.0, rel=1e-12)
