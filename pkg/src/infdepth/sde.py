"""Integration of the infinite-depth limit and its closed-form special cases.

The limiting process is

    dX_t = n^{-1/2} |phi(X_t)| dB_t,   X_t in R^n,

discretized by Euler-Maruyama on a uniform grid of ``steps`` points per unit
time. A ResNet of depth ``L`` with a single input is the same recursion
with ``delta = 1/L`` in law, since ``W phi(Y)`` given ``Y`` is
``N(0, |phi(Y)|^2 / n I)``.

Stream discipline: one path draws its per-step noise from
``stream.child("noise")`` (``n`` normals per step, or ``k * n`` input-major
for ``k`` coupled inputs); batched helpers give sample ``i`` the stream
``stream.child("sample", i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .activations import RELU, ActivationSpec, parse_activation
from .errors import DomainError, PreconditionError
from .numerics import RngStream, as_generator, cholesky_psd, gauss_matrix, map_batches
from .paths import Path
from .stats import MonteCarloSummary, summarize

__all__ = [
    "SdeConfig",
    "euler_path",
    "euler_paths",
    "euler_path_multi",
    "gram_block",
    "gbm_exact",
    "ou_exact",
    "McKeanCheck",
    "mckean_marginal_check",
    "StrongOrder",
    "strong_order",
]

# normals drawn per generator call
_NOISE_BUDGET = 1 << 20


@dataclass(frozen=True)
class SdeConfig:
    """Grid and coefficients of one Euler discretization.

    ``steps`` counts grid intervals per unit time, so the path has
    ``round(steps * t_end)`` steps of size ``1 / steps``. A sample whose
    state leaves the activation's domain, or ``stop_radius`` when one is
    set, is stopped: frozen, flagged and excluded from reductions.
    """

    width: int
    steps: int = 1000
    t_end: float = 1.0
    activation: ActivationSpec = field(default=RELU)
    seed: int = 0
    stop_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "activation", parse_activation(self.activation))
        if self.width < 1:
            raise PreconditionError("width must be >= 1")
        if self.steps < 1:
            raise PreconditionError("steps must be >= 1")
        if not self.t_end > 0:
            raise PreconditionError("t_end must be positive")
        if self.stop_radius is not None and not self.stop_radius > 0:
            raise PreconditionError("stop_radius must be positive")

    @property
    def delta(self) -> float:
        return 1.0 / self.steps

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.steps * self.t_end)))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.delta

    def stream(self) -> RngStream:
        return RngStream(self.seed)


def _alive(cfg, x):
    ok = np.all(cfg.activation.in_domain(x), axis=-1)
    if cfg.stop_radius is not None:
        ok &= np.all(np.abs(x) <= cfg.stop_radius, axis=-1)
    return ok


def _post(act, x, alive):
    if alive.all():
        return act.value(x)
    out = np.zeros_like(x)
    out[alive] = act.value(x[alive])
    return out


def _iter_euler(cfg, x, gens):
    """Yield ``(step, X, alive)`` for a batch ``x`` (B, n); one generator per row."""
    n = cfg.width
    coef = math.sqrt(cfg.delta / n)
    alive = _alive(cfg, x)
    yield 0, x, alive
    total = cfg.n_steps
    chunk = max(1, min(total, _NOISE_BUDGET // max(1, len(gens) * n)))
    for start in range(0, total, chunk):
        m = min(chunk, total - start)
        noise = np.stack([g.standard_normal((m, n)) for g in gens])
        for j in range(m):
            p = _post(cfg.activation, x, alive)
            vol = np.sqrt((p * p).sum(axis=-1))
            x = x + coef * (vol[:, None] * noise[:, j])
            alive = alive & _alive(cfg, x)
            yield start + j + 1, x, alive


def _check_x0(cfg, x0):
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != cfg.width:
        raise PreconditionError(f"x0 has dimension {x0.size}, expected {cfg.width}")
    if not np.all(np.isfinite(x0)):
        raise PreconditionError("x0 must be finite")
    return x0


def euler_path(cfg: SdeConfig, x0, stream: RngStream | None = None) -> Path:
    """One Euler-Maruyama path ``X_0 .. X_T``; NaN after a stop."""
    stream = cfg.stream() if stream is None else stream
    x = _check_x0(cfg, x0)[None, :]
    states = np.empty((cfg.n_steps + 1, cfg.width))
    for k, state, alive in _iter_euler(cfg, x, [stream.child("noise").generator()]):
        states[k] = state[0] if alive[0] else np.nan
    return Path(states, cfg.grid, scheme="euler",
                meta={"steps": cfg.steps, "t_end": cfg.t_end, "activation": cfg.activation.name})


def _batch_size(cfg):
    return int(max(1, min(1024, _NOISE_BUDGET // (cfg.width * min(cfg.n_steps, 64)))))


def euler_paths(cfg: SdeConfig, x0, n_samples: int, stream: RngStream | None = None, *,
                record=None, init_variance: float | None = None, threads: int = 1) -> np.ndarray:
    """Independent Euler paths recorded at step indices ``record``.

    Returns ``(n_samples, len(record), width)``, NaN for stopped samples.
    Sample ``i`` equals ``euler_path(cfg, x0, stream.child("sample", i))``.
    With ``init_variance`` the start is random, ``X_0 ~ N(0, v I)`` drawn
    from ``stream.child("sample", i).child("init")``, and ``x0`` is ignored.
    """
    stream = cfg.stream() if stream is None else stream
    if init_variance is None:
        x0 = _check_x0(cfg, x0)
    elif not init_variance > 0:
        raise PreconditionError("init_variance must be positive")
    record = np.arange(cfg.n_steps + 1) if record is None else np.asarray(record, dtype=int)
    if record.size and (record.min() < 0 or record.max() > cfg.n_steps):
        raise PreconditionError("recorded steps must lie in [0, n_steps]")
    slot = {int(k): i for i, k in enumerate(record)}
    out = np.empty((n_samples, record.size, cfg.width))

    def run(a, b):
        streams = [stream.child("sample", i) for i in range(a, b)]
        if init_variance is None:
            x = np.tile(x0, (b - a, 1))
        else:
            x = np.stack([gauss_matrix(s.child("init"), 1, cfg.width, init_variance)[0]
                          for s in streams])
        gens = [s.child("noise").generator() for s in streams]
        for k, state, alive in _iter_euler(cfg, x, gens):
            if k in slot:
                out[a:b, slot[k]] = np.where(alive[:, None], state, np.nan)

    map_batches(run, n_samples, _batch_size(cfg), threads)
    return out


def gram_block(post) -> np.ndarray:
    """``A_ij = <phi(X^i), phi(X^j)>`` for stacked post-activations ``(k, n)``.

    Entries are computed as elementwise products reduced along the last
    axis, so ``A_ii`` matches the single-path squared norm bit for bit.
    """
    post = np.asarray(post, dtype=float)
    a = (post[:, None, :] * post[None, :, :]).sum(axis=-1)
    return 0.5 * (a + a.T)


def euler_path_multi(cfg: SdeConfig, inputs, stream: RngStream | None = None) -> list:
    """Coupled Euler paths for ``k`` inputs driven by a common Brownian motion.

    Per step the stacked increment is ``sqrt(delta/n) (F kron I_n) xi`` with
    ``F F^T = A`` the Gram block of the current post-activations and ``xi``
    a ``k * n`` standard normal drawn input-major. ``k = 1`` reproduces
    :func:`euler_path` exactly. A stop in any input stops all of them.
    """
    stream = cfg.stream() if stream is None else stream
    xs = np.atleast_2d(np.asarray(inputs, dtype=float))
    xs = np.stack([_check_x0(cfg, x) for x in xs])
    k, n = xs.shape
    coef = math.sqrt(cfg.delta / n)
    gen = stream.child("noise").generator()
    total = cfg.n_steps
    states = np.full((total + 1, k, n), np.nan)
    x = xs.copy()
    states[0] = x
    alive = bool(_alive(cfg, x).all())
    chunk = max(1, min(total, _NOISE_BUDGET // (k * n)))
    for start in range(0, total, chunk):
        m = min(chunk, total - start)
        noise = gen.standard_normal((m, k, n))
        if not alive:
            continue
        for j in range(m):
            # identical states share one factor row so they stay identical
            _, first, inverse = np.unique(x, axis=0, return_index=True, return_inverse=True)
            order = np.argsort(first)
            rank = np.empty_like(order)
            rank[order] = np.arange(order.size)
            lead = first[order]
            p = cfg.activation.value(x[lead])
            f = cholesky_psd(gram_block(p))
            x = x + coef * (f @ noise[j][lead])[rank[inverse.ravel()]]
            alive = bool(_alive(cfg, x).all())
            if not alive:
                break
            states[start + j + 1] = x
    return [Path(states[:, i], cfg.grid, scheme="euler", meta={"input": i}) for i in range(k)]


# ---------------------------------------------------------------------------
# exact samplers

def gbm_exact(x0: float, a: float, sigma: float, t: float, stream=None, size=None):
    """Exact draw of ``X_t = x0 exp((a - sigma^2/2) t + sigma B_t)``."""
    if not x0 > 0:
        raise DomainError("gbm_exact needs x0 > 0")
    if t < 0:
        raise PreconditionError("t must be >= 0")
    if t == 0:
        return x0 if size is None else np.full(size, float(x0))
    z = as_generator(stream if stream is not None else RngStream(0)).standard_normal(size)
    out = x0 * np.exp((a - 0.5 * sigma * sigma) * t + sigma * math.sqrt(t) * z)
    return float(out) if size is None else out


def ou_exact(x0: float, a: float, b: float, sigma: float, t: float, stream=None, size=None):
    """Exact draw of the OU process ``dX = a (b - X) dt + sigma dB`` at time ``t``."""
    if not a > 0:
        raise DomainError("ou_exact needs a > 0")
    if t < 0:
        raise PreconditionError("t must be >= 0")
    if t == 0:
        return x0 if size is None else np.full(size, float(x0))
    decay = math.exp(-a * t)
    mean = x0 * decay + b * (1.0 - decay)
    sd = math.sqrt(sigma * sigma / (2.0 * a) * -math.expm1(-2.0 * a * t))
    z = as_generator(stream if stream is not None else RngStream(0)).standard_normal(size)
    out = mean + sd * z
    return float(out) if size is None else out


# ---------------------------------------------------------------------------
# wide-network marginal

@dataclass
class McKeanCheck:
    """Coordinate variance of a wide ReLU SDE over time against ``|x|^2/d e^{t/2}``.

    ``variance[i]`` and ``stderr[i]`` refer to the first coordinate at
    ``times[i]``; ``pooled`` averages the coordinate variances, which share
    the same target. ``summary`` describes the first coordinate at the
    final time.
    """

    times: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray
    pooled: np.ndarray
    theory: np.ndarray
    summary: MonteCarloSummary

    @property
    def relative_error(self) -> float:
        return float(abs(self.variance[-1] / self.theory[-1] - 1.0))


def _variance_stderr(x):
    x = x - x.mean()
    m2 = np.mean(x * x)
    m4 = np.mean(x ** 4)
    return math.sqrt(max(m4 - m2 * m2, 0.0) / x.size)


def mckean_marginal_check(width: int, input_dim: int, x, steps: int = 1000, n_samples: int = 2000,
                          stream: RngStream | None = None, *, t_end: float = 1.0,
                          n_times: int = 11, threads: int = 1) -> McKeanCheck:
    """Simulate the ReLU SDE from ``X_0 ~ N(0, |x|^2/d I_n)`` and track variances."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != input_dim or not np.any(x):
        raise PreconditionError("x must be a nonzero vector of size input_dim")
    cfg = SdeConfig(width=width, steps=steps, t_end=t_end, activation=RELU)
    stream = RngStream(0) if stream is None else stream
    q0 = float(x @ x) / input_dim
    record = np.unique(np.round(np.linspace(0, cfg.n_steps, n_times)).astype(int))
    paths = euler_paths(cfg, None, n_samples, stream, record=record, init_variance=q0,
                        threads=threads)
    times = record * cfg.delta
    first = paths[:, :, 0]
    variance = np.array([summarize(first[:, i]).variance for i in range(record.size)])
    stderr = np.array([_variance_stderr(first[:, i]) for i in range(record.size)])
    pooled = paths.var(axis=0, ddof=1).mean(axis=-1)
    return McKeanCheck(times=times, variance=variance, stderr=stderr, pooled=pooled,
                       theory=q0 * np.exp(times / 2.0), summary=summarize(first[:, -1]))


# ---------------------------------------------------------------------------
# strong convergence order

@dataclass
class StrongOrder:
    steps: np.ndarray
    rms_error: np.ndarray
    slope: float
    intercept: float


def _coupled_sup_error(width, steps, x0, n_samples, stream, activation, refine):
    """RMS over samples of ``sup_k |X^coarse_k - X^fine_{refine k}|``.

    The coarse path at step ``1/steps`` is driven by the sum of the
    ``refine`` fine normals in each interval, scaled by ``refine^{-1/2}``.
    """
    n = width
    coef_f = math.sqrt(1.0 / (steps * refine * n))
    coef_c = math.sqrt(1.0 / (steps * n))
    z = np.stack([stream.child("sample", i).generator().standard_normal((steps, refine, n))
                  for i in range(n_samples)])
    zc = z.sum(axis=2) / math.sqrt(refine)
    xf = np.tile(np.asarray(x0, dtype=float), (n_samples, 1))
    xc = xf.copy()
    worst = np.zeros(n_samples)
    for k in range(steps):
        for r in range(refine):
            p = activation.value(xf)
            xf = xf + coef_f * np.sqrt((p * p).sum(axis=-1))[:, None] * z[:, k, r]
        p = activation.value(xc)
        xc = xc + coef_c * np.sqrt((p * p).sum(axis=-1))[:, None] * zc[:, k]
        worst = np.maximum(worst, ((xc - xf) ** 2).sum(axis=-1))
    return math.sqrt(float(np.mean(worst)))


def strong_order(width: int, steps_list=(64, 256, 1024), n_samples: int = 200,
                 stream: RngStream | None = None, *, x0=None, activation=RELU,
                 refine: int = 4) -> StrongOrder:
    """Estimate the strong order of the Euler scheme by coupled refinement.

    For every coarse step count the scheme is compared against itself at
    ``refine`` times the resolution on the same Brownian path; the slope
    of ``log(rms error)`` against ``log(delta)`` is the empirical order.
    """
    activation = parse_activation(activation)
    stream = RngStream(0) if stream is None else stream
    steps_list = np.asarray(sorted(int(s) for s in steps_list))
    if steps_list.size < 2 or steps_list.min() < 1:
        raise PreconditionError("need at least two positive step counts")
    x0 = np.ones(width) if x0 is None else np.asarray(x0, dtype=float).ravel()
    rms = np.array([
        _coupled_sup_error(width, int(s), x0, n_samples, stream.child("steps", int(s)),
                           activation, refine)
        for s in steps_list
    ])
    slope, intercept = np.polyfit(np.log(1.0 / steps_list), np.log(rms), 1)
    return StrongOrder(steps=steps_list, rms_error=rms, slope=float(slope),
                       intercept=float(intercept))
