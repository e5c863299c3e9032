"""Finite-width, finite-depth residual network at random initialization.

The network is

    Y_0 = W_in x,    Y_l = Y_{l-1} + L^{-1/2} W_l phi(Y_{l-1}),  l = 1..L

with ``W_in ~ N(0, 1/d)`` and ``W_l ~ N(0, 1/n)`` entries and no biases.
With ``scaled=False`` the ``L^{-1/2}`` block factor is dropped.

Random streams: a single draw uses ``stream.child("input")`` for ``W_in``
and ``stream.child("layers")`` for ``W_1 .. W_L`` in order. Monte Carlo
helpers give sample ``i`` the stream ``stream.child("sample", i)``, so a
sample's weights never depend on batching or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .activations import RELU, ActivationSpec, parse_activation
from .errors import PreconditionError, UnsupportedError
from .numerics import RngStream, gauss_matrix, map_batches
from .paths import Path
from .stats import MonteCarloSummary, summarize, wilson_ci

__all__ = [
    "NetworkConfig",
    "forward",
    "sample_states",
    "forward_multi",
    "correlation_path",
    "collapse_probability",
    "gradient_norms",
    "log_post_norm_ratios",
]

# float budget for one block of stacked weight matrices
_WEIGHT_BUDGET = 1 << 22


@dataclass(frozen=True)
class NetworkConfig:
    width: int
    depth: int
    input_dim: int = 1
    activation: ActivationSpec = field(default=RELU)
    scaled: bool = True
    seed: int = 0
    stop_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "activation", parse_activation(self.activation))
        if self.stop_radius is not None and not self.stop_radius > 0:
            raise PreconditionError("stop_radius must be positive")
        if self.width < 1 or self.input_dim < 1:
            raise PreconditionError("width and input_dim must be >= 1")
        if self.depth < 0:
            raise PreconditionError("depth must be >= 0")

    @property
    def block_scale(self) -> float:
        if not self.scaled or self.depth == 0:
            return 1.0
        return 1.0 / math.sqrt(self.depth)

    def stream(self) -> RngStream:
        return RngStream(self.seed)


def _check_input(cfg, x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != cfg.input_dim:
        raise PreconditionError(f"input has dimension {x.size}, expected {cfg.input_dim}")
    if not np.any(x):
        raise PreconditionError("input x must be nonzero")
    return x


def _initial_state(cfg, x, stream, y0):
    if y0 is not None:
        y = np.asarray(y0, dtype=float).ravel()
        if y.size != cfg.width:
            raise PreconditionError(f"y0 has dimension {y.size}, expected {cfg.width}")
        return y.copy()
    w_in = gauss_matrix(stream.child("input"), cfg.width, cfg.input_dim, 1.0 / cfg.input_dim)
    return w_in @ x


# at and above this width a per-row BLAS matvec beats the broadcast product
_MATVEC_WIDTH = 64


def _matvec_rows(w, post):
    """Row-wise ``w[b] @ post[b]`` for ``w`` (B, n, n) and ``post`` (B, n).

    Each row is reduced on its own, so the bits of row ``b`` do not depend
    on the other rows in the batch.
    """
    if w.shape[-1] >= _MATVEC_WIDTH:
        return np.stack([w[b] @ post[b] for b in range(w.shape[0])])
    return (w * post[:, None, :]).sum(axis=-1)


def _layer_chunk(batch, width, depth):
    return max(1, min(depth, _WEIGHT_BUDGET // max(1, batch * width * width)))


def _iter_layers(cfg, y, gens):
    """Yield ``(l, Y_l, alive)`` for a batch ``y`` (B, n), one generator per row.

    Row ``b`` only ever touches ``gens[b]`` and row-local arithmetic, so its
    trajectory is bit-identical whatever the batch composition. A row whose
    state leaves the activation's domain (or the optional stop radius) is
    frozen and reported with ``alive[b] = False`` from then on; its weight
    draws continue so other rows are unaffected.
    """
    n, depth = cfg.width, cfg.depth
    act = cfg.activation
    scale = cfg.block_scale
    sd = math.sqrt(1.0 / n)
    alive = _alive(cfg, y)
    yield 0, y, alive
    chunk = _layer_chunk(len(gens), n, depth)
    for start in range(0, depth, chunk):
        m = min(chunk, depth - start)
        w = np.stack([g.standard_normal((m, n, n)) for g in gens]) * sd
        for j in range(m):
            if alive.all():
                post = act.value(y)
            else:
                post = np.zeros_like(y)
                post[alive] = act.value(y[alive])
            y = y + scale * _matvec_rows(w[:, j], post)
            alive = alive & _alive(cfg, y)
            yield start + j + 1, y, alive


def _alive(cfg, y):
    ok = np.all(cfg.activation.in_domain(y), axis=-1)
    if cfg.stop_radius is not None:
        ok &= np.all(np.abs(y) <= cfg.stop_radius, axis=-1)
    return ok


def forward(cfg: NetworkConfig, x, stream: RngStream | None = None, *, y0=None) -> Path:
    """One random draw of the network; returns the neural path ``Y_0..Y_L``.

    ``y0`` pins the first state (the width-1 experiments start from
    ``Y_0 = 1``); ``x`` is still validated but ``W_in`` is not drawn.
    States after an exit from the activation's domain are NaN.
    """
    stream = cfg.stream() if stream is None else stream
    x = _check_input(cfg, x)
    y = _initial_state(cfg, x, stream, y0)[None, :]
    gens = [stream.child("layers").generator()]
    states = np.empty((cfg.depth + 1, cfg.width))
    for l, state, alive in _iter_layers(cfg, y, gens):
        states[l] = state[0] if alive[0] else np.nan
    return Path(states, np.arange(cfg.depth + 1), scheme="resnet",
                meta={"width": cfg.width, "depth": cfg.depth, "activation": cfg.activation.name,
                      "scaled": cfg.scaled})


def _batch_size(cfg):
    per_sample = cfg.width * cfg.width * max(1, min(cfg.depth, 16))
    return int(max(1, min(512, _WEIGHT_BUDGET // per_sample)))


def sample_states(cfg: NetworkConfig, x, n_samples: int, stream: RngStream | None = None, *,
                  y0=None, layers=None, threads: int = 1) -> np.ndarray:
    """Independent draws of the network, recorded at ``layers``.

    Returns an array of shape ``(n_samples, len(layers), width)``; the
    default records every layer ``0..L``. States of a sample that left the
    activation's domain are NaN from that layer on, so reductions count it
    as excluded. Sample ``i`` equals
    ``forward(cfg, x, stream.child("sample", i), y0=y0)`` bit for bit.
    """
    stream = cfg.stream() if stream is None else stream
    x = _check_input(cfg, x)
    layers = np.arange(cfg.depth + 1) if layers is None else np.asarray(layers, dtype=int)
    if layers.size and (layers.min() < 0 or layers.max() > cfg.depth):
        raise PreconditionError("recorded layers must lie in [0, depth]")
    slot = {int(l): i for i, l in enumerate(layers)}
    out = np.empty((n_samples, layers.size, cfg.width))

    def run(a, b):
        streams = [stream.child("sample", i) for i in range(a, b)]
        y = np.stack([_initial_state(cfg, x, s, y0) for s in streams])
        gens = [s.child("layers").generator() for s in streams]
        for l, state, alive in _iter_layers(cfg, y, gens):
            if l in slot:
                out[a:b, slot[l]] = np.where(alive[:, None], state, np.nan)

    map_batches(run, n_samples, _batch_size(cfg), threads)
    return out


def forward_multi(cfg: NetworkConfig, inputs, stream: RngStream | None = None) -> list:
    """Propagate ``k`` inputs through one shared weight draw.

    With ``k = 1`` this reproduces :func:`forward` exactly.
    """
    stream = cfg.stream() if stream is None else stream
    xs = np.atleast_2d(np.asarray(inputs, dtype=float))
    xs = np.stack([_check_input(cfg, x) for x in xs])
    k = xs.shape[0]
    w_in = gauss_matrix(stream.child("input"), cfg.width, cfg.input_dim, 1.0 / cfg.input_dim)
    y = np.stack([w_in @ x for x in xs])
    gen = stream.child("layers").generator()
    act, scale = cfg.activation, cfg.block_scale
    sd = math.sqrt(1.0 / cfg.width)
    states = np.empty((cfg.depth + 1, k, cfg.width))
    states[0] = y
    chunk = _layer_chunk(1, cfg.width, cfg.depth)
    for start in range(0, cfg.depth, chunk):
        m = min(chunk, cfg.depth - start)
        w = gen.standard_normal((m, cfg.width, cfg.width)) * sd
        for j in range(m):
            post = act.value(y)
            y = y + scale * _matvec_rows(np.broadcast_to(w[j], (k,) + w[j].shape), post)
            states[start + j + 1] = y
    grid = np.arange(cfg.depth + 1)
    return [Path(states[:, i], grid, scheme="resnet", meta={"input": i}) for i in range(k)]


def correlation_path(path_a: Path, path_b: Path) -> np.ndarray:
    """``<Y_l(a), Y_l(b)> / (|Y_l(a)| |Y_l(b)|)`` per step; NaN where a norm is 0."""
    a, b = path_a.states, path_b.states
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    dots = np.einsum("ij,ij->i", a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = dots / (na * nb)
    corr = np.where((na > 0) & (nb > 0), corr, np.nan)
    # rounding can push |c| a hair above 1
    return np.clip(corr, -1.0, 1.0)


def collapse_probability(cfg: NetworkConfig, x, n_samples: int, stream: RngStream | None = None,
                         *, threads: int = 1, level: float = 0.95) -> MonteCarloSummary:
    """Estimate ``P(exists l in 0..L with phi(Y_l) = 0)`` with a Wilson interval.

    Only hard-zero activations (ReLU, piecewise-linear with a zero slope)
    collapse with positive probability; others raise
    :class:`UnsupportedError`. Depth 0 gives ``P(Y_0 <= 0 coordinatewise)``.
    """
    if not cfg.activation.hard_zero:
        raise UnsupportedError(
            f"collapse needs a hard-zero activation, got {cfg.activation.name}"
        )
    stream = cfg.stream() if stream is None else stream
    x = _check_input(cfg, x)
    hits = np.zeros(n_samples)

    def run(a, b):
        streams = [stream.child("sample", i) for i in range(a, b)]
        y = np.stack([_initial_state(cfg, x, s, None) for s in streams])
        gens = [s.child("layers").generator() for s in streams]
        dead = np.zeros(b - a, dtype=bool)
        for _, state, _alive_rows in _iter_layers(cfg, y, gens):
            dead |= ~np.any(cfg.activation.value(state) != 0, axis=1)
        hits[a:b] = dead

    map_batches(run, n_samples, _batch_size(cfg), threads)
    summary = summarize(hits)
    summary.interval = wilson_ci(int(hits.sum()), n_samples, level)
    return summary


def gradient_norms(cfg: NetworkConfig, x, terminal_gradient, stream: RngStream | None = None, *,
                   y0=None) -> np.ndarray:
    """Back-propagated gradient norms ``|g_L|, |g_{L-1}|, ..., |g_0|`` over ``|g_L|``.

    ``g_{l-1} = g_l + s * phi'(Y_{l-1}) * (W_l^T g_l)`` with ``s`` the block
    scale. The whole weight sequence of the draw is kept in memory.
    """
    stream = cfg.stream() if stream is None else stream
    x = _check_input(cfg, x)
    g = np.asarray(terminal_gradient, dtype=float).ravel()
    if g.size != cfg.width or not np.any(g):
        raise PreconditionError("terminal gradient must be a nonzero vector of size width")
    n, depth = cfg.width, cfg.depth
    gen = stream.child("layers").generator()
    weights = gen.standard_normal((depth, n, n)) * math.sqrt(1.0 / n)
    act, scale = cfg.activation, cfg.block_scale
    y = _initial_state(cfg, x, stream, y0)
    states = [y]
    for l in range(depth):
        y = y + scale * _matvec_rows(weights[l][None], act.value(y)[None])[0]
        states.append(y)
    norms = [np.linalg.norm(g)]
    for l in range(depth, 0, -1):
        g = g + scale * act.derivative(states[l - 1]) * (weights[l - 1].T @ g)
        norms.append(np.linalg.norm(g))
    norms = np.asarray(norms)
    return norms / norms[0]


def log_post_norm_ratios(states, activation, *, post: bool = True) -> np.ndarray:
    """``log(|phi(Y_l)| / |phi(Y_0)|)`` for stacked states ``(N, m, n)``.

    Entries are NaN where either norm vanishes (collapsed samples). With
    ``post=False`` the pre-activation norms are used.
    """
    states = np.asarray(states, dtype=float)
    vals = activation.value(states) if post else states
    norms = np.linalg.norm(vals, axis=-1)
    base = norms[:, :1]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(norms / base)
    return np.where((base > 0) & (norms > 0), out, np.nan)
