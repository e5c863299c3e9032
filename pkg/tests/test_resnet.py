import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from infdepth.activations import IDENTITY, RELU, parse_activation
from infdepth.errors import PreconditionError, UnsupportedError
from infdepth.numerics import RngStream, gauss_matrix
from infdepth.resnet import (
    NetworkConfig,
    collapse_probability,
    correlation_path,
    forward,
    forward_multi,
    gradient_norms,
    log_post_norm_ratios,
    sample_states,
)

# n = 1, L = 1, x = 1: Y_0 <= 0 with probability 1/2, otherwise Y_1 = Y_0 (1 + W_1)
# collapses when W_1 <= -1, so P = 1/2 + Phi(-1)/2
COLLAPSE_N1_L1 = 0.5793276269657286


class TestConfig:
    def test_block_scale(self):
        assert NetworkConfig(3, 16).block_scale == 0.25
        assert NetworkConfig(3, 16, scaled=False).block_scale == 1.0
        assert NetworkConfig(3, 0).block_scale == 1.0

    def test_activation_from_text(self):
        assert NetworkConfig(2, 2, activation="relu").activation == RELU

    @pytest.mark.parametrize("kwargs", [dict(width=0, depth=1), dict(width=2, depth=-1),
                                        dict(width=2, depth=1, input_dim=0),
                                        dict(width=2, depth=1, stop_radius=0.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(PreconditionError):
            NetworkConfig(**kwargs)


class TestForward:
    def test_one_layer_by_hand(self):
        cfg = NetworkConfig(4, 1, input_dim=3, seed=5)
        x = np.array([1.0, -2.0, 0.5])
        stream = cfg.stream()
        w_in = gauss_matrix(stream.child("input"), 4, 3, 1 / 3)
        w1 = stream.child("layers").generator().standard_normal((1, 4, 4))[0] * 0.5
        y0 = w_in @ x
        y1 = y0 + w1 @ np.maximum(y0, 0)
        path = forward(cfg, x)
        assert np.allclose(path.states[0], y0, rtol=1e-15)
        assert np.allclose(path.states[1], y1, rtol=1e-14, atol=1e-15)

    def test_shape_and_grid(self):
        path = forward(NetworkConfig(3, 7), [1.0])
        assert path.states.shape == (8, 3)
        assert np.array_equal(path.grid, np.arange(8))

    def test_reproducible(self):
        cfg = NetworkConfig(5, 20, seed=3)
        assert np.array_equal(forward(cfg, [1.0]).states, forward(cfg, [1.0]).states)

    def test_zero_input_rejected(self):
        with pytest.raises(PreconditionError):
            forward(NetworkConfig(3, 2, input_dim=2), [0.0, 0.0])

    def test_wrong_input_dim(self):
        with pytest.raises(PreconditionError):
            forward(NetworkConfig(3, 2, input_dim=2), [1.0])

    def test_y0_pins_start(self):
        path = forward(NetworkConfig(1, 5), [1.0], y0=[1.0])
        assert path.states[0, 0] == 1.0

    def test_identity_activation_is_linear(self):
        cfg = NetworkConfig(4, 6, activation=IDENTITY, seed=2)
        a = forward(cfg, [1.0], y0=np.ones(4)).states
        b = forward(cfg, [1.0], y0=2 * np.ones(4)).states
        assert np.allclose(b, 2 * a, rtol=1e-13)

    @given(st.integers(0, 2**32), st.integers(1, 4))
    @settings(max_examples=40, deadline=None)
    def test_relu_absorbing(self, seed, width):
        # once phi(Y_l) = 0 every later block adds zero
        path = forward(NetworkConfig(width, 30, seed=seed), [1.0])
        dead = np.flatnonzero(~np.any(path.states > 0, axis=1))
        if dead.size:
            l = dead[0]
            assert np.all(path.states[l:] == path.states[l])

    def test_exit_from_domain_is_nan(self):
        cfg = NetworkConfig(1, 50, activation="exotic:1:0", scaled=False, seed=0)
        paths = sample_states(cfg, [1.0], 200, RngStream(0), y0=[1.0])
        stopped = np.isnan(paths[:, -1, 0])
        assert stopped.any()
        for s in paths[stopped]:
            first = np.flatnonzero(np.isnan(s[:, 0]))[0]
            assert np.all(np.isnan(s[first:]))

    def test_stop_radius(self):
        cfg = NetworkConfig(2, 200, scaled=False, seed=1, stop_radius=5.0)
        states = sample_states(cfg, [1.0], 30, RngStream(1))
        finite = states[np.isfinite(states)]
        assert np.all(np.abs(finite) <= 5.0)


class TestSampleStates:
    def test_matches_forward(self):
        cfg = NetworkConfig(3, 9, input_dim=2)
        stream = RngStream(4)
        x = [0.3, -1.0]
        states = sample_states(cfg, x, 5, stream)
        for i in range(5):
            assert np.array_equal(states[i], forward(cfg, x, stream.child("sample", i)).states)

    def test_wide_rows_match_forward(self):
        cfg = NetworkConfig(70, 3)
        stream = RngStream(8)
        states = sample_states(cfg, [1.0], 3, stream)
        assert np.array_equal(states[2], forward(cfg, [1.0], stream.child("sample", 2)).states)

    def test_layer_subset(self):
        cfg = NetworkConfig(3, 10)
        full = sample_states(cfg, [1.0], 4, RngStream(0))
        part = sample_states(cfg, [1.0], 4, RngStream(0), layers=[0, 10])
        assert np.array_equal(part, full[:, [0, 10]])

    def test_bad_layers(self):
        with pytest.raises(PreconditionError):
            sample_states(NetworkConfig(3, 10), [1.0], 2, layers=[11])

    def test_threads_do_not_change_bits(self):
        cfg = NetworkConfig(3, 12)
        a = sample_states(cfg, [1.0], 40, RngStream(6), threads=1)
        b = sample_states(cfg, [1.0], 40, RngStream(6), threads=4)
        assert np.array_equal(a, b, equal_nan=True)

    def test_permutation_invariance_in_law(self):
        # the law of Y_L is invariant under permuting coordinates
        states = sample_states(NetworkConfig(3, 20), [1.0], 3000, RngStream(12), layers=[20])[:, 0]
        p = sps.ks_2samp(states[:, 0], states[:, 2]).pvalue
        assert p > 1e-3


class TestForwardMulti:
    def test_single_input_bitwise(self):
        cfg = NetworkConfig(6, 15, input_dim=2, seed=9)
        x = [1.0, 0.5]
        assert np.array_equal(forward_multi(cfg, [x])[0].states, forward(cfg, x).states)

    def test_shares_weights(self):
        cfg = NetworkConfig(4, 5, activation=IDENTITY, seed=1)
        a, b = forward_multi(cfg, [[1.0], [-2.0]])
        assert np.allclose(b.states, -2 * a.states, rtol=1e-13)

    def test_marginal_law_matches_forward(self):
        cfg = NetworkConfig(2, 10, input_dim=2)
        x = np.array([0.0, 1.0])
        root = RngStream(21)
        multi = np.array([forward_multi(cfg, [[1.0, 0.0], x], root.child("sample", i))[1].final[0]
                          for i in range(1500)])
        single = sample_states(cfg, x, 1500, RngStream(22), layers=[10])[:, 0, 0]
        assert sps.ks_2samp(multi, single).pvalue > 1e-3


class TestCorrelation:
    def test_self_correlation(self):
        p = forward(NetworkConfig(4, 10, seed=2), [1.0])
        c = correlation_path(p, p)
        assert np.allclose(c[np.isfinite(c)], 1.0)

    def test_bounds(self):
        cfg = NetworkConfig(5, 40, input_dim=2, seed=3)
        a, b = forward_multi(cfg, [[1.0, 0.0], [1.0, 1.0]])
        c = correlation_path(a, b)
        assert np.all(np.abs(c[np.isfinite(c)]) <= 1.0)

    def test_zero_norm_nan(self):
        from infdepth.paths import Path
        a = Path([[0.0, 0.0], [1.0, 0.0]], [0, 1])
        c = correlation_path(a, a)
        assert np.isnan(c[0]) and c[1] == 1.0


class TestCollapse:
    def test_width_one_depth_one(self):
        s = collapse_probability(NetworkConfig(1, 1), [1.0], 20_000, RngStream(0))
        lo, hi = s.interval
        assert lo <= COLLAPSE_N1_L1 <= hi

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_depth_zero(self, n):
        s = collapse_probability(NetworkConfig(n, 0), [1.0], 20_000, RngStream(n))
        lo, hi = s.interval
        assert lo <= 2.0 ** -n <= hi

    def test_monotone_in_depth_per_draw(self):
        # collapse over layers 0..L is a superset of collapse over 0..l for l < L
        cfg = NetworkConfig(2, 30)
        states = sample_states(cfg, [1.0], 500, RngStream(3))
        dead = ~np.any(states > 0, axis=2)
        first = np.cumsum(dead, axis=1) > 0
        assert np.all(np.diff(first.astype(int), axis=1) >= 0)

    def test_smooth_activation_unsupported(self):
        with pytest.raises(UnsupportedError):
            collapse_probability(NetworkConfig(2, 3, activation="tanh"), [1.0], 10)

    def test_threads(self):
        cfg = NetworkConfig(2, 5)
        a = collapse_probability(cfg, [1.0], 300, RngStream(2), threads=1)
        b = collapse_probability(cfg, [1.0], 300, RngStream(2), threads=3)
        assert a.mean == b.mean


class TestGradients:
    def test_one_layer_by_hand(self):
        cfg = NetworkConfig(3, 1, seed=4)
        g = np.array([1.0, -1.0, 2.0])
        path = forward(cfg, [1.0])
        w1 = cfg.stream().child("layers").generator().standard_normal((1, 3, 3))[0] / math.sqrt(3)
        g0 = g + (path.states[0] > 0) * (w1.T @ g)
        out = gradient_norms(cfg, [1.0], g)
        assert out[0] == 1.0
        assert out[1] == pytest.approx(np.linalg.norm(g0) / np.linalg.norm(g), rel=1e-13)

    def test_one_entry_per_layer(self):
        cfg = NetworkConfig(3, 4, activation=IDENTITY, seed=1)
        out = gradient_norms(cfg, [1.0], np.ones(3))
        assert out.shape == (5,)

    def test_bad_terminal(self):
        with pytest.raises(PreconditionError):
            gradient_norms(NetworkConfig(3, 4), [1.0], np.zeros(3))

    def test_scaled_stays_bounded(self):
        cfg = NetworkConfig(10, 100, seed=0)
        med = np.median([gradient_norms(cfg, [1.0], np.ones(10), RngStream(s))[-1]
                         for s in range(10)])
        assert med < 10

    def test_unscaled_explodes(self):
        cfg = NetworkConfig(10, 100, scaled=False, seed=0)
        med = np.median([gradient_norms(cfg, [1.0], np.ones(10), RngStream(s))[-1]
                         for s in range(10)])
        assert med > 100


class TestLogRatios:
    def test_values(self):
        states = np.array([[[1.0, 0.0], [3.0, -4.0], [-1.0, -1.0]]])
        out = log_post_norm_ratios(states, RELU)
        assert out[0, 0] == 0.0
        assert out[0, 1] == pytest.approx(math.log(3.0))
        assert np.isnan(out[0, 2])

    def test_pre_activation(self):
        states = np.array([[[1.0, 0.0], [3.0, -4.0]]])
        out = log_post_norm_ratios(states, RELU, post=False)
        assert out[0, 1] == pytest.approx(math.log(5.0))

    def test_piecewise_parsed(self):
        act = parse_activation("piecewise:1:0")
        states = np.array([[[2.0], [4.0]]])
        assert log_post_norm_ratios(states, act)[0, 1] == pytest.approx(math.log(2.0))
