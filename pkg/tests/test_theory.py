import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from infdepth.errors import DomainError, PreconditionError
from infdepth.numerics import RngStream
from infdepth.theory import (
    TheoryPrediction,
    collapse_prob_init,
    gbm_log_params,
    ou_marginal_params,
    ou_rate,
    piecewise_mean_drift,
    relu_log_growth_mean,
    relu_log_growth_var_bound,
    sequential_limit_norm_ratio,
    sequential_limit_variance,
    var_bound_gamma,
)

# n = 2, p2 = 1/4: Gamma = (1/4)(0.109375 + 0.0625) and (1/sqrt 2 + sqrt Gamma)^2
GAMMA_N2 = 0.04296875
BOUND_N2 = 0.8361197349889641
E_MINUS_PI_4 = 0.45593812776599624


class TestLogGrowthMean:
    def test_width_one(self):
        assert relu_log_growth_mean(1, 0.0, 0.7) == pytest.approx(-0.35, rel=1e-15)

    def test_width_four_positive(self):
        assert relu_log_growth_mean(4) == pytest.approx(1 / 60, rel=1e-13)

    def test_width_three_negative(self):
        assert relu_log_growth_mean(3) == pytest.approx(2 / 7 - 1 / 3, rel=1e-13)

    def test_appendix_variant(self):
        assert relu_log_growth_mean(4, variant="appendix") == pytest.approx(15 / 64 - 1 / 4)

    def test_sign_patterns(self):
        main = [relu_log_growth_mean(n) for n in range(1, 30)]
        app = [relu_log_growth_mean(n, variant="appendix") for n in range(1, 30)]
        assert all(np.diff(main) > 0)
        assert main[2] < 0 < main[3]
        assert app[3] < 0 < app[4]

    def test_zero_interval(self):
        assert relu_log_growth_mean(5, 0.4, 0.4) == 0.0

    def test_bad_interval(self):
        with pytest.raises(PreconditionError):
            relu_log_growth_mean(2, 0.5, 0.2)

    def test_bad_variant(self):
        with pytest.raises(PreconditionError):
            relu_log_growth_mean(2, variant="other")


class TestVarBound:
    def test_gamma_constant_curve(self):
        assert var_bound_gamma(2, 0.0, 1.0, 0.25) == pytest.approx(GAMMA_N2, abs=1e-15)

    def test_bound_value(self):
        assert relu_log_growth_var_bound(2, 0.0, 1.0, 0.25) == pytest.approx(BOUND_N2, rel=1e-13)

    def test_trapezoid_agrees_on_constant(self):
        curve = np.full(11, 0.25)
        assert var_bound_gamma(2, 0.0, 1.0, curve) == pytest.approx(GAMMA_N2, rel=1e-14)

    def test_scales_with_interval(self):
        assert var_bound_gamma(3, 0.2, 0.7, 0.3) == pytest.approx(0.5 * var_bound_gamma(3, 0, 1, 0.3))

    def test_first_bracket_vanishes(self):
        n = 50
        q = 1 - 2.0 ** -n
        g = var_bound_gamma(n, 0.0, 1.0, q * q / 4)
        assert g == pytest.approx(0.25 * (q / 2 - q * q / 4) / n, rel=1e-12)

    def test_clipped_at_zero(self):
        assert var_bound_gamma(2, 0.0, 1.0, 0.0) >= 0.0

    @given(st.floats(0.3, 0.99), st.floats(0.0, 0.01))
    def test_monotone_in_p2(self, p, dp):
        assert var_bound_gamma(100, 0, 1, p + dp) >= var_bound_gamma(100, 0, 1, p)

    def test_empty_curve(self):
        with pytest.raises(PreconditionError):
            var_bound_gamma(2, 0.0, 1.0, [])

    def test_out_of_range_curve(self):
        with pytest.raises(PreconditionError):
            var_bound_gamma(2, 0.0, 1.0, [0.2, 1.5])

    def test_needs_width_two(self):
        with pytest.raises(PreconditionError):
            relu_log_growth_var_bound(1, 0.0, 1.0, 0.25)


class TestPiecewise:
    def test_identity(self):
        assert piecewise_mean_drift(1.0, -1.0, 4) == pytest.approx(0.25)

    def test_relu_branch(self):
        assert piecewise_mean_drift(1.0, 0.0, 3) == pytest.approx(7 / 32 - 1 / 3)

    def test_perturbed(self):
        assert piecewise_mean_drift(1.0, 0.9, 2) == pytest.approx(-0.0475, abs=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 5])
    @pytest.mark.parametrize("coef", [0.5, 1.0, 2.0])
    def test_jump_at_poles(self, n, coef):
        eps = 1e-9
        near = piecewise_mean_drift(coef, eps, n)
        at = piecewise_mean_drift(coef, 0.0, n)
        assert near - at == pytest.approx(2.0 ** -n * coef ** 2 / 4, abs=1e-8)
        near = piecewise_mean_drift(eps, coef, n)
        at = piecewise_mean_drift(0.0, coef, n)
        assert near - at == pytest.approx(2.0 ** -n * coef ** 2 / 4, abs=1e-8)

    @given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
    def test_continuous_off_poles(self, a, b):
        assert piecewise_mean_drift(a, b, 3) == pytest.approx(piecewise_mean_drift(a + 1e-9, b, 3),
                                                              abs=1e-8)

    def test_origin(self):
        with pytest.raises(DomainError):
            piecewise_mean_drift(0.0, 0.0, 2)


class TestCollapseInit:
    def test_values(self):
        assert collapse_prob_init(1) == 0.5
        assert collapse_prob_init(10) == 1 / 1024

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_sign_enumeration(self, n):
        z = RngStream(n).generator().standard_normal((200_000, n))
        p = np.mean(np.all(z <= 0, axis=1))
        assert abs(p - collapse_prob_init(n)) < 4 * math.sqrt(p * (1 - p) / 200_000) + 1e-4


class TestSequentialLimits:
    def test_time_zero(self):
        for order in ("depth_then_width", "width_then_depth"):
            for variant in ("as_stated", "reconciled"):
                assert sequential_limit_variance(0.0, order, variant) == 1.0
                assert sequential_limit_norm_ratio(0.0, order, variant) == 1.0

    def test_as_stated(self):
        assert sequential_limit_variance(1.0) == pytest.approx(1.6487212707, rel=1e-10)
        assert sequential_limit_variance(1.0, "width_then_depth") == pytest.approx(math.e)
        assert sequential_limit_norm_ratio(1.0) == pytest.approx(1.2840254167, rel=1e-10)
        assert sequential_limit_norm_ratio(1.0, "width_then_depth") == pytest.approx(1.6487212707)

    def test_reconciled(self):
        assert sequential_limit_variance(1.0, "width_then_depth", "reconciled") == pytest.approx(
            math.exp(0.5))
        assert sequential_limit_norm_ratio(1.0, "width_then_depth", "reconciled") == pytest.approx(
            math.exp(0.25))

    def test_bad_time(self):
        with pytest.raises(PreconditionError):
            sequential_limit_variance(1.5)


class TestOu:
    def test_rate(self):
        assert ou_rate() == pytest.approx(0.7853981633974483, rel=1e-15)

    def test_time_zero(self):
        assert ou_marginal_params(1.3, 1.0, 0.0) == (1.3, 0.0)

    def test_unit_time(self):
        mean, var = ou_marginal_params(1.0, 1.0, 1.0)
        assert mean == pytest.approx(E_MINUS_PI_4, rel=1e-14)
        assert var == pytest.approx((math.pi / 2) * (1 - math.exp(-math.pi / 2)), rel=1e-14)

    def test_long_time(self):
        mean, var = ou_marginal_params(2.0, 1.0, 60.0)
        assert abs(mean) < 1e-15
        assert var == pytest.approx(math.pi / 2, rel=1e-15)


class TestGbmParams:
    def test_relu_case(self):
        assert gbm_log_params(1.0, 0.0, 1.0, 1.0) == (-0.5, 1.0)

    def test_cancellation(self):
        mean, var = gbm_log_params(2.0, 0.5, 1.0, 3.0)
        assert mean == pytest.approx(math.log(2.0))
        assert var == 3.0

    def test_domain(self):
        with pytest.raises(DomainError):
            gbm_log_params(-1.0, 0.0, 1.0, 1.0)


class TestPrediction:
    def test_round_trip(self):
        p = TheoryPrediction("mean", "mean", (0.5,), "log growth")
        assert p.to_dict() == {"label": "mean", "kind": "mean", "value": [0.5],
                               "source": "log growth"}
        assert TheoryPrediction("v", "variance", 2.0, "s").to_dict()["value"] == 2.0

    def test_nonfinite_rejected(self):
        with pytest.raises(PreconditionError):
            TheoryPrediction("x", "mean", (math.nan,), "src")
