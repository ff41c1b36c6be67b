import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdepeaks.bounds import (Linear, SaturatingLinear, burkholder_constant, contraction_factor,
                              heat_lower_sup, lambda_bounds_heat, lambda_exact_wave,
                              lambda_upper_general, laplace_kernel_norm, lower_condition,
                              lower_condition_region, moment_threshold_general, moment_threshold_heat,
                              moment_threshold_wave, sigma_from_dict, sigma_to_dict)
from spdepeaks.kernels import Heat, Wave
from spdepeaks.levy import Brownian, TruncatedStable


class TestSigma:
    def test_linear(self):
        s = Linear(-2.0)
        assert s(0.0) == 0.0 and s(1.5) == -3.0
        assert s.lip == 2.0 and s.lower_slope == 2.0

    def test_saturating(self):
        s = SaturatingLinear(1.0, 2.0)
        np.testing.assert_array_equal(s(np.array([-5.0, 0.0, 1.0, 5.0])), [-2.0, 0.0, 1.0, 2.0])
        assert s.lip == 1.0 and s.lower_slope == 0.0

    def test_dict_round_trip(self):
        for s in (Linear(0.5), SaturatingLinear(1.5, 3.0)):
            assert sigma_from_dict(sigma_to_dict(s)) == s
        with pytest.raises(ValueError):
            sigma_from_dict({"form": "cubic", "lambda": 1.0})


class TestBurkholder:
    @pytest.mark.parametrize("nu,z", [(2, 1.0), (4, 4.0), (16, 8.0)])
    def test_values(self, nu, z):
        assert burkholder_constant(nu).z_nu == z

    @pytest.mark.parametrize("nu", [1, 3, 0, 2.5])
    def test_rejects_odd(self, nu):
        with pytest.raises(ValueError):
            burkholder_constant(nu)


class TestThresholds:
    def test_general_examples(self):
        b = Brownian(1.0)
        assert moment_threshold_general(b, Linear(1.0), 2, 0.0) == pytest.approx(2.0, rel=1e-9)
        assert moment_threshold_general(b, Linear(1.0), 2, 1.0) == pytest.approx(2.5, rel=1e-9)
        assert moment_threshold_general(b, Linear(2.0), 2, 0.0) == pytest.approx(32.0, rel=1e-9)

    def test_heat_examples(self):
        assert moment_threshold_heat(1.0, 1.0, 2.0) == 1.25
        assert moment_threshold_heat(1.0, 0.0, 0.0) == 0.0
        assert moment_threshold_heat(2.0, 1.0, 0.0) == 0.125

    def test_wave_examples(self):
        th = moment_threshold_wave(1.0, 1.0, 2, 1.0)
        assert th.kappa_free == math.sqrt(1.5)
        assert th.derived == math.sqrt(1.5)
        zero = moment_threshold_wave(1.0, 0.0, 2, 0.0)
        assert zero.kappa_free == 0.0 and zero.derived == 0.0

    def test_wave_forms_differ_off_unit_speed(self):
        th = moment_threshold_wave(2.0, 1.0, 2, 0.0)
        assert th.kappa_free == pytest.approx(math.sqrt(0.5))
        assert th.derived == pytest.approx(1.0)

    @pytest.mark.parametrize("kappa", [0.25, 0.5, 1.0, 2.0, 4.0])
    @pytest.mark.parametrize("lip", [0.3, 1.0, 2.0])
    def test_general_never_beats_heat(self, kappa, lip):
        gen = moment_threshold_general(Brownian(kappa), Linear(lip), 2, 0.0)
        assert gen >= moment_threshold_heat(kappa, lip, 0.0)


class TestLambdaUpper:
    def test_examples(self):
        assert lambda_upper_general(Brownian(1.0), Linear(1.0), 2) == pytest.approx(2.0, abs=1e-7)
        assert lambda_upper_general(Brownian(1.0), Linear(0.0), 2) == 0.0

    def test_kappa_four(self):
        # Lambda(a) = a^2/8 and the level is 2 Lip^4/kappa = 0.5, so a = 2
        assert lambda_upper_general(Brownian(4.0), Linear(1.0), 2) == pytest.approx(2.0, abs=1e-7)

    def test_nonincreasing_in_kappa(self):
        vals = [lambda_upper_general(Brownian(k), Linear(1.0), 2) for k in (0.25, 0.5, 1, 2, 4, 8)]
        assert all(b <= a + 1e-7 for a, b in zip(vals, vals[1:]))
        assert min(vals) >= 0

    def test_stable_positive(self):
        assert lambda_upper_general(TruncatedStable(1.5), Linear(1.0), 2) > 0

    @given(st.floats(0.1, 3.0), st.sampled_from([2, 4]))
    def test_closed_form(self, lip, nu):
        z = burkholder_constant(nu).z_nu
        val = lambda_upper_general(Brownian(1.0), Linear(lip), nu)
        assert val == pytest.approx(2 * z * z * lip * lip, abs=2e-8)


class TestIntervals:
    def test_heat(self):
        iv = lambda_bounds_heat(Linear(1.0))
        assert (iv.lower, iv.upper) == (1 / (2 * math.pi), 0.5)
        iv = lambda_bounds_heat(Linear(2.0))
        assert (iv.lower, iv.upper) == (4 / (2 * math.pi), 2.0)
        iv = lambda_bounds_heat(Linear(0.0))
        assert (iv.lower, iv.upper) == (0.0, 0.0)

    def test_heat_lower_unavailable(self):
        assert lambda_bounds_heat(SaturatingLinear(1.0, 2.0)).lower is None

    def test_wave(self):
        assert lambda_exact_wave(1.0) == 1.0
        assert lambda_exact_wave(2.5) == 2.5
        assert lambda_exact_wave(1e-300) == pytest.approx(0.0)


class TestLowerCondition:
    def test_examples(self):
        L = Linear(1.0)
        assert lower_condition(Wave(1.0), L, 0.9, 0.1) is True
        assert lower_condition(Heat(Brownian(1.0)), L, 0.1, 0.0) is True
        assert lower_condition(Heat(Brownian(1.0)), L, 0.1, 1.0) is False

    def test_needs_lower_slope(self):
        with pytest.raises(ValueError):
            lower_condition(Wave(1.0), SaturatingLinear(1.0, 1.0), 0.5, 0.1)

    def test_heat_region_is_interval(self):
        alphas = np.linspace(0, 0.2, 401)
        for beta in (1e-4, 1e-3, 5e-3):
            mask = lower_condition_region(Heat(Brownian(1.0)), Linear(1.0), alphas, [beta])[:, 0]
            idx = np.flatnonzero(mask)
            assert idx.size and np.all(np.diff(idx) == 1)
            assert alphas[idx[-1]] <= heat_lower_sup(1.0, 1.0, beta)

    def test_heat_sup_limit(self):
        assert abs(heat_lower_sup(1.0, 1.0, 1e-6) - 1 / (2 * math.pi)) <= 1e-3


class TestContraction:
    @pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("c", [0.0, 0.5, -1.0])
    def test_heat_contracts_above_threshold(self, kappa, c):
        spec, sig = Heat(Brownian(kappa)), Linear(1.0)
        beta = 1.01 * moment_threshold_heat(kappa, 1.0, c)
        assert contraction_factor(spec, sig, 2, beta, c) < 1
        assert contraction_factor(spec, sig, 2, 0.99 * moment_threshold_heat(kappa, 1.0, c), c) > 1

    @pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("c", [0.0, 0.3])
    def test_wave_contracts_above_derived(self, kappa, c):
        beta = 1.01 * moment_threshold_wave(kappa, 1.0, 2, c).derived
        assert contraction_factor(Wave(kappa), Linear(1.0), 2, beta, c) < 1

    def test_kappa_free_wave_form_insufficient_at_kappa_two(self):
        beta = 1.01 * moment_threshold_wave(2.0, 1.0, 2, 0.0).kappa_free
        assert contraction_factor(Wave(2.0), Linear(1.0), 2, beta) > 1

    def test_general_threshold_contracts(self):
        for m in (Brownian(1.0), TruncatedStable(1.5)):
            beta = 1.01 * 2 * moment_threshold_general(m, Linear(1.0), 2, 0.0)
            # the general threshold bounds upsilon evaluated at twice its value
            assert contraction_factor(Heat(m), Linear(1.0), 2, beta) < 1

    def test_kernel_norm_closed_forms(self):
        assert laplace_kernel_norm(Heat(Brownian(2.0)), 0.5) == pytest.approx(1 / (2 * math.sqrt(1.0)), rel=1e-8)
        assert laplace_kernel_norm(Wave(2.0), 3.0, 1.0) == pytest.approx(2 / (2 * (9 - 4)), rel=1e-8)
        assert laplace_kernel_norm(Wave(2.0), 2.0, 1.0) == math.inf
