import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from infdepth.activations import (
    IDENTITY,
    RELU,
    ActivationSpec,
    apply,
    exotic_g,
    exotic_g_inverse,
    exotic_phi,
    gbm_drift,
    gbm_transform_g,
    parse_activation,
)
from infdepth.errors import DomainError, PreconditionError
from infdepth.numerics import ERFI_MAX

# exp(u^2) and sqrt(pi) u at u = erfi_inv(1), from an mpmath root
EXOTIC_PHI_1 = 1.7080984332152760
EXOTIC_G_1 = 1.2968994373618337
# (log(1 + e^50) - log 2) / 10 in 30-digit arithmetic
SMOOTH_RELU_10_AT_5 = 4.930685281944005

ALL_KINDS = ["relu", "piecewise:0.5:-2", "linear:2:1", "smooth_relu:10", "exotic:1:0",
             "exotic:0.5:0.3", "tanh", "gelu", "swish"]

finite_vectors = arrays(np.float64, st.integers(1, 12),
                        elements=st.floats(-20, 20, allow_nan=False))


class TestCatalog:
    def test_parse_names(self):
        assert parse_activation("relu") == RELU
        assert parse_activation("identity") == IDENTITY
        assert parse_activation("piecewise:1.0:-1.0") == IDENTITY
        assert parse_activation("smooth_relu:10").params == (10.0,)
        assert parse_activation(" Exotic:1:0 ").kind == "exotic"

    def test_name_round_trip(self):
        for text in ALL_KINDS:
            spec = parse_activation(text)
            assert parse_activation(spec.name) == spec

    def test_bad_kind(self):
        with pytest.raises(PreconditionError):
            parse_activation("sigmoidal")

    def test_wrong_param_count(self):
        with pytest.raises(PreconditionError):
            ActivationSpec("relu", (1.0,))
        with pytest.raises(PreconditionError):
            parse_activation("exotic:1")

    def test_bad_smooth_relu(self):
        with pytest.raises(PreconditionError):
            parse_activation("smooth_relu:0")

    def test_hard_zero(self):
        assert RELU.hard_zero
        assert parse_activation("piecewise:1:0").hard_zero
        assert parse_activation("piecewise:0:2").hard_zero
        assert not IDENTITY.hard_zero
        assert not parse_activation("smooth_relu:100").hard_zero
        assert not parse_activation("tanh").hard_zero


class TestApply:
    def test_relu(self):
        assert np.array_equal(apply(RELU, [-1.0, 2.0, 0.0]), [0.0, 2.0, 0.0])

    def test_identity(self):
        v = np.array([-3.5, 0.0, 1e-300, 7.25])
        assert np.array_equal(apply(IDENTITY, v), v)

    def test_smooth_relu_value(self):
        spec = parse_activation("smooth_relu:10")
        assert apply(spec, 5.0) == pytest.approx(SMOOTH_RELU_10_AT_5, rel=1e-14)

    def test_smooth_relu_zero(self):
        assert apply(parse_activation("smooth_relu:3"), 0.0) == 0.0

    def test_exotic_domain(self):
        with pytest.raises(DomainError):
            apply(parse_activation("exotic:1:0"), [2 * ERFI_MAX])

    @pytest.mark.parametrize("text", ALL_KINDS)
    def test_concatenation(self, text):
        spec = parse_activation(text)
        a = np.linspace(-3, 3, 7)
        b = np.linspace(-1, 2, 5)
        assert np.array_equal(apply(spec, np.concatenate([a, b])),
                              np.concatenate([apply(spec, a), apply(spec, b)]))

    @given(finite_vectors, st.floats(1e-3, 1e3))
    def test_relu_homogeneous(self, v, c):
        assert np.allclose(apply(RELU, c * v), c * apply(RELU, v), rtol=1e-12, atol=0)

    @given(finite_vectors)
    def test_relu_nonnegative(self, v):
        assert np.all(apply(RELU, v) >= 0)


class TestDerivatives:
    @pytest.mark.parametrize("text", ALL_KINDS + ["identity", "piecewise:1:0"])
    def test_central_differences(self, text):
        spec = parse_activation(text)
        z = np.linspace(-3.0, 3.0, 601)
        z = z[np.abs(z) > 1e-3]
        h = 1e-6
        fd = (spec.value(z + h) - spec.value(z - h)) / (2 * h)
        d = spec.derivative(z)
        scale = np.maximum(np.abs(d), 1e-2)
        assert np.max(np.abs(fd - d) / scale) < 1e-6

    def test_relu_kink(self):
        assert RELU.derivative(0.0) == 0.0

    def test_smooth_relu_logistic(self):
        m = 10.0
        z = np.linspace(-2, 2, 41)
        assert np.allclose(parse_activation("smooth_relu:10").derivative(z),
                           1.0 / (1.0 + np.exp(-m * z)), rtol=1e-14, atol=0)

    @pytest.mark.parametrize("m", [1.0, 10.0, 100.0])
    def test_smooth_relu_step_limit(self, m):
        z = np.linspace(-1, 1, 2001)
        z = z[z != 0]
        d = parse_activation(f"smooth_relu:{m}").derivative(z)
        assert np.all(np.abs(d - (z > 0)) <= np.exp(-m * np.abs(z)) + 1e-15)

    @pytest.mark.parametrize("m", [1.0, 10.0, 100.0])
    def test_smooth_relu_uniform_bound(self, m):
        z = np.linspace(-50, 50, 10_000)
        gap = np.abs(parse_activation(f"smooth_relu:{m}").value(z) - RELU.value(z))
        assert np.max(gap) <= 1.0 / m


class TestExotic:
    def test_origin(self):
        assert exotic_phi(1.0, 0.0, 0.0) == 1.0

    def test_value_at_one(self):
        assert exotic_phi(1.0, 0.0, 1.0) == pytest.approx(EXOTIC_PHI_1, rel=1e-13)

    def test_g_at_one(self):
        assert exotic_g(1.0, 0.0, 1.0) == pytest.approx(EXOTIC_G_1, rel=1e-13)

    def test_even_about_center(self):
        alpha, beta = 0.7, 0.4
        c = -beta / alpha
        for d in (0.1, 0.9, 3.0):
            assert exotic_phi(alpha, beta, c + d) == pytest.approx(exotic_phi(alpha, beta, c - d),
                                                                   rel=1e-12)

    def test_phi_at_least_one(self):
        y = np.linspace(-100, 100, 1001)
        assert np.all(exotic_phi(1.0, 0.0, y) >= 1.0)

    def test_g_zero_at_center(self):
        assert exotic_g(2.0, 1.0, -0.5) == 0.0

    def test_g_increasing(self):
        assert exotic_g(1.0, 0.0, 0.5) < exotic_g(1.0, 0.0, 1.0)
        y = np.linspace(-1e3, 1e3, 5001)
        assert np.all(np.diff(exotic_g(1.0, 0.0, y)) > 0)

    def test_g_inverse(self):
        y = np.array([-40.0, -1.0, 0.0, 0.3, 12.0])
        assert np.allclose(exotic_g_inverse(0.8, 0.2, exotic_g(0.8, 0.2, y)), y, rtol=1e-10)

    def test_derivative_is_g(self):
        spec = parse_activation("exotic:1.5:0.2")
        y = np.linspace(-2, 2, 9)
        assert np.array_equal(spec.derivative(y), exotic_g(1.5, 0.2, y))


class TestGbmTransform:
    def test_identity(self):
        y = np.array([0.1, 1.0, 7.0])
        assert np.array_equal(gbm_transform_g(1.0, 0.0, 1.0, y), y)

    def test_sqrt(self):
        assert gbm_transform_g(2.0, 0.0, 0.5, 1.0) == pytest.approx(math.sqrt(2.0), rel=1e-15)

    def test_nonpositive_base(self):
        with pytest.raises(DomainError):
            gbm_transform_g(1.0, 0.0, 2.0, -1.0)

    def test_drift_vanishes_at_gamma_one(self):
        assert gbm_drift(1.7, 1.0) == 0.0

    def test_drift_formula(self):
        assert gbm_drift(2.0, 2.0) == pytest.approx(0.5 * 4.0 * 0.5 / 1.0)
