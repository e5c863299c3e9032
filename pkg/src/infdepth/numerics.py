"""Random streams, Gaussian sampling, small dense factorizations and the
imaginary error function.

Every other module draws its randomness through :class:`RngStream`, so a
(root seed, stream path) pair always reproduces the same numbers no matter
how samples are scheduled across threads or batches.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .errors import ConvergenceError, DomainError, NotPSDError, PreconditionError

__all__ = [
    "RngStream",
    "as_generator",
    "gauss_matrix",
    "erfi",
    "erfi_inv",
    "ERFI_ARG_MAX",
    "ERFI_MAX",
    "cholesky_psd",
    "ks_asymptotic_pvalue",
    "compensated_sum",
    "map_batches",
]

_SEED_MASK = (1 << 64) - 1


def _label_key(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """Address of an independent random stream.

    A stream is identified by a 64-bit root seed and a path of
    ``(label, index)`` pairs, e.g. ``(("gbm-hist", 0), ("sample", 17))``.
    The path is hashed into a :class:`numpy.random.SeedSequence` spawn key
    and fed to the counter-based Philox generator, so streams with distinct
    paths are statistically independent and any stream can be rebuilt
    without replaying its siblings.
    """

    root_seed: int
    path: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "root_seed", int(self.root_seed) & _SEED_MASK)
        object.__setattr__(
            self, "path", tuple((str(lbl), int(idx)) for lbl, idx in self.path)
        )

    def child(self, label: str, index: int = 0) -> "RngStream":
        return RngStream(self.root_seed, self.path + ((label, index),))

    def spawn_key(self) -> tuple:
        key = []
        for label, index in self.path:
            key.append(_label_key(label))
            key.append(index & _SEED_MASK)
        return tuple(key)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.root_seed, spawn_key=self.spawn_key())
        return np.random.Generator(np.random.Philox(seq))


def as_generator(stream) -> np.random.Generator:
    """Accept an :class:`RngStream` or an already-open ``Generator``."""
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RngStream):
        return stream.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(stream)!r}")


def gauss_matrix(stream, rows: int, cols: int, variance: float) -> np.ndarray:
    """Matrix of iid ``N(0, variance)`` entries.

    Passing an open ``Generator`` continues that generator's sequence;
    passing an :class:`RngStream` starts the stream from its beginning.
    """
    if not variance > 0:
        raise PreconditionError(f"variance must be positive, got {variance}")
    if rows < 1 or cols < 1:
        raise PreconditionError(f"matrix dimensions must be positive, got {rows}x{cols}")
    gen = as_generator(stream)
    return math.sqrt(variance) * gen.standard_normal((rows, cols))


def compensated_sum(values) -> float:
    """Correctly rounded sum; the result does not depend on input order."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


# ---------------------------------------------------------------------------
# imaginary error function

ERFI_ARG_MAX = 6.0
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def erfi(z):
    """Imaginary error function ``(2/sqrt(pi)) * int_0^z exp(t^2) dt``.

    Thin wrapper over :func:`scipy.special.erfi` restricted to ``|z| <= 6``,
    the range on which its inverse is needed. Scalars in, scalar out.
    """
    arr = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(np.abs(arr) > ERFI_ARG_MAX):
        raise DomainError(f"erfi is supported on |z| <= {ERFI_ARG_MAX}")
    out = special.erfi(arr)
    if np.ndim(z) == 0:
        return float(out)
    return out


ERFI_MAX = erfi(ERFI_ARG_MAX)


def _erfi_inv_seed(y):
    # y >= 0. Small y: cubic inversion of erfi(u) ~ (2/sqrt(pi))(u + u^3/3).
    # Large y: erfi(u) ~ exp(u^2) / (sqrt(pi) u).
    w = 0.5 * math.sqrt(math.pi) * y
    small = w - w ** 3 / 3.0
    ly = np.log(np.maximum(math.sqrt(math.pi) * y, 1.0))
    big = np.sqrt(np.maximum(ly + 0.5 * np.log(np.maximum(ly, 1.0)), 0.0))
    seed = np.where(y < 1.0, small, big)
    return np.clip(seed, 0.0, ERFI_ARG_MAX)


def erfi_inv(y, max_iter: int = 100):
    """Inverse of :func:`erfi` on ``|y| <= erfi(6)``.

    Safeguarded Newton iteration: each step is accepted only if it stays
    inside the current sign bracket, otherwise the bracket is bisected.
    Raises :class:`ConvergenceError` if ``max_iter`` is exhausted.
    """
    arr = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(np.abs(arr) > ERFI_MAX):
        raise DomainError(f"erfi_inv is supported on |y| <= erfi({ERFI_ARG_MAX})")
    target = np.abs(arr).ravel()
    u = _erfi_inv_seed(target)
    lo = np.zeros_like(target)
    hi = np.full_like(target, ERFI_ARG_MAX)
    active = target > 0
    u[~active] = 0.0
    resid = np.zeros_like(target)
    for _ in range(max_iter):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        ui = u[idx]
        r = erfi(ui) - target[idx]
        resid[idx] = r
        above = r > 0
        hi[idx] = np.where(above, np.minimum(hi[idx], ui), hi[idx])
        lo[idx] = np.where(above, lo[idx], np.maximum(lo[idx], ui))
        step = r / (_TWO_OVER_SQRT_PI * np.exp(ui * ui))
        newton = ui - step
        done = (r == 0) | (np.abs(step) <= 4e-16 * np.maximum(1.0, ui))
        bad = ~done & ((newton <= lo[idx]) | (newton >= hi[idx]) | ~np.isfinite(newton))
        u[idx] = np.where(bad, 0.5 * (lo[idx] + hi[idx]), newton)
        active[idx[done]] = False
    if np.any(active):
        worst = float(np.max(np.abs(resid[active])))
        raise ConvergenceError(
            f"erfi_inv did not converge in {max_iter} iterations", residual=worst
        )
    out = np.copysign(u.reshape(arr.shape), arr)
    if np.ndim(y) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# linear algebra

def cholesky_psd(a, pivot_tol: float | None = None) -> np.ndarray:
    """Lower-triangular ``F`` with ``F @ F.T == a`` for symmetric PSD ``a``.

    Pivots in ``[-pivot_tol, pivot_tol]`` zero their column, so Gram
    matrices of repeated inputs factor cleanly. A pivot below
    ``-pivot_tol`` raises :class:`NotPSDError`. The default tolerance is
    ``1e-12`` times the largest diagonal entry.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {a.shape}")
    k = a.shape[0]
    if k < 1 or k > 64:
        raise PreconditionError(f"matrix size must be in [1, 64], got {k}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if np.any(np.abs(a - a.T) > 1e-12 * max(scale, 1e-300)):
        raise PreconditionError("matrix is not symmetric")
    if pivot_tol is None:
        pivot_tol = 1e-12 * max(float(np.max(np.diag(a))), 0.0)
    f = np.zeros_like(a)
    for j in range(k):
        row = f[j, :j]
        d = a[j, j] - row @ row
        if d < -pivot_tol:
            raise NotPSDError(f"negative pivot {d:.3e} at column {j}")
        if d <= pivot_tol:
            continue
        piv = math.sqrt(d)
        f[j, j] = piv
        if j + 1 < k:
            f[j + 1:, j] = (a[j + 1:, j] - f[j + 1:, :j] @ row) / piv
    return f


# ---------------------------------------------------------------------------
# Kolmogorov distribution

def ks_asymptotic_pvalue(statistic: float, n_samples: float) -> float:
    """Asymptotic Kolmogorov-Smirnov p-value ``Q(sqrt(n) * D)``.

    ``Q`` is the survival function of the Kolmogorov distribution
    (:data:`scipy.stats.kstwobign`). ``n_samples`` may be fractional, as for
    the effective size ``n m / (n + m)`` of a two-sample test.
    """
    if n_samples < 35:
        raise PreconditionError(
            f"asymptotic KS p-value needs n >= 35, got {n_samples}"
        )
    if not 0.0 <= statistic <= 1.0:
        raise PreconditionError(f"KS statistic must lie in [0, 1], got {statistic}")
    return float(stats.kstwobign.sf(math.sqrt(n_samples) * statistic))


# ---------------------------------------------------------------------------
# sample-level parallelism

def map_batches(fn, n_items: int, batch_size: int, threads: int = 1) -> list:
    """Apply ``fn(start, stop)`` to consecutive index ranges.

    Batch boundaries depend only on ``n_items`` and ``batch_size``, and the
    results come back in index order, so the output does not depend on
    ``threads``.
    """
    batch_size = max(1, int(batch_size))
    ranges = [(s, min(s + batch_size, n_items)) for s in range(0, n_items, batch_size)]
    if threads <= 1 or len(ranges) <= 1:
        return [fn(a, b) for a, b in ranges]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(lambda ab: fn(*ab), ranges))
