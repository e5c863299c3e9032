"""Monte Carlo reductions and goodness-of-fit tests against theory."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

from .errors import PreconditionError
from .numerics import compensated_sum, ks_asymptotic_pvalue

__all__ = [
    "QUANTILE_LEVELS",
    "MonteCarloSummary",
    "summarize",
    "Normal",
    "LogNormal",
    "Empirical",
    "KsResult",
    "ks_test",
    "GaussianKDE",
    "gaussian_kde",
    "silverman_bandwidth",
    "wilson_ci",
]

QUANTILE_LEVELS = (0.005, 0.025, 0.5, 0.975, 0.995)


@dataclass
class MonteCarloSummary:
    n_samples: int
    n_excluded: int
    mean: float
    variance: float
    stderr: float
    quantiles: dict
    interval: tuple | None = None

    @property
    def n_retained(self) -> int:
        return self.n_samples - self.n_excluded

    def within(self, target: float, k: float = 3.0) -> bool:
        """True when ``|mean - target| <= k * stderr``."""
        return abs(self.mean - target) <= k * self.stderr

    def to_dict(self) -> dict:
        out = asdict(self)
        out["quantiles"] = {str(q): v for q, v in self.quantiles.items()}
        if self.interval is not None:
            out["interval"] = list(self.interval)
        return out


def summarize(samples, n_excluded: int = 0) -> MonteCarloSummary:
    """Moments and quantiles of a scalar Monte Carlo functional.

    NaN entries are treated as excluded samples (stopped or collapsed
    paths) and counted in ``n_excluded`` together with the explicit
    ``n_excluded`` argument. Sums are correctly rounded, so the result is
    invariant under permutation of ``samples``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    keep = ~np.isnan(x)
    dropped = int(x.size - keep.sum()) + int(n_excluded)
    x = x[keep]
    n = x.size
    if n < 2:
        raise PreconditionError(f"need at least 2 retained samples, got {n}")
    mean = compensated_sum(x) / n
    mean += compensated_sum(x - mean) / n
    dev = x - mean
    variance = compensated_sum(dev * dev) / (n - 1)
    xs = np.sort(x)
    qs = np.quantile(xs, QUANTILE_LEVELS)
    quantiles = {q: float(v) for q, v in zip(QUANTILE_LEVELS, qs)}
    return MonteCarloSummary(
        n_samples=n + dropped,
        n_excluded=dropped,
        mean=float(mean),
        variance=float(variance),
        stderr=math.sqrt(variance / n),
        quantiles=quantiles,
    )


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov

@dataclass(frozen=True)
class Normal:
    mu: float = 0.0
    sigma: float = 1.0

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)


@dataclass(frozen=True)
class LogNormal:
    """Law of ``exp(N(mu, sigma^2))``."""

    mu: float = 0.0
    sigma: float = 1.0


@dataclass(frozen=True)
class Empirical:
    samples: np.ndarray = field(repr=False)


@dataclass
class KsResult:
    statistic: float
    p_value: float
    n: float

    def to_dict(self) -> dict:
        return {"D": self.statistic, "p": self.p_value, "n": self.n}


def _ks_one_sample(x, cdf):
    return float(stats.kstest(x, cdf).statistic), float(x.size)


def _ks_two_sample(x, y):
    d = float(stats.ks_2samp(x, y).statistic)
    return d, x.size * y.size / (x.size + y.size)


def ks_test(samples, reference) -> KsResult:
    """Kolmogorov-Smirnov test of ``samples`` against ``reference``.

    ``reference`` is a :class:`Normal`, :class:`LogNormal` (tested on the
    log scale) or :class:`Empirical` (two-sample test with effective size
    ``n1 n2 / (n1 + n2)``). P-values use the asymptotic Kolmogorov law.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 35:
        raise PreconditionError(f"KS test needs at least 35 samples, got {x.size}")
    if isinstance(reference, Normal):
        d, n = _ks_one_sample(x, reference.cdf)
    elif isinstance(reference, LogNormal):
        if np.any(x <= 0):
            raise PreconditionError("lognormal reference needs positive samples")
        d, n = _ks_one_sample(np.log(x), Normal(reference.mu, reference.sigma).cdf)
    elif isinstance(reference, Empirical):
        y = np.asarray(reference.samples, dtype=float).ravel()
        if y.size < 35:
            raise PreconditionError("empirical reference needs at least 35 samples")
        d, n = _ks_two_sample(x, y)
    else:
        raise PreconditionError(f"unsupported KS reference {reference!r}")
    return KsResult(statistic=d, p_value=ks_asymptotic_pvalue(d, n), n=n)


# ---------------------------------------------------------------------------
# density estimation

def silverman_bandwidth(samples) -> float:
    """``0.9 * min(std, IQR / 1.34) * n^(-1/5)``; falls back to std if IQR is 0."""
    x = np.asarray(samples, dtype=float).ravel()
    std = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(std, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = std
    return 0.9 * spread * x.size ** (-0.2)


class GaussianKDE:
    """Gaussian kernel density estimate with an explicit bandwidth ``h``.

    Evaluation is delegated to :class:`scipy.stats.gaussian_kde`, with the
    bandwidth factor chosen so the kernel standard deviation is exactly ``h``.
    """

    def __init__(self, samples, bandwidth: float | None = None):
        x = np.asarray(samples, dtype=float).ravel()
        if x.size < 2:
            raise PreconditionError("KDE needs at least 2 samples")
        std = float(np.std(x, ddof=1))
        if std == 0:
            raise PreconditionError("KDE of zero-variance samples is undefined")
        if bandwidth is None:
            bandwidth = silverman_bandwidth(x)
        if not bandwidth > 0:
            raise PreconditionError("bandwidth must be positive")
        self.samples = x
        self.bandwidth = float(bandwidth)
        self._kde = stats.gaussian_kde(x, bw_method=self.bandwidth / std)

    def __call__(self, grid):
        g = np.atleast_1d(np.asarray(grid, dtype=float))
        out = self._kde(g.ravel()).reshape(g.shape)
        return out if np.ndim(grid) else float(out[0])

    def mode(self, grid_size: int = 2001) -> float:
        lo, hi = self.samples.min(), self.samples.max()
        grid = np.linspace(lo, hi, grid_size)
        return float(grid[np.argmax(self(grid))])


def gaussian_kde(samples, bandwidth: float | None = None) -> GaussianKDE:
    return GaussianKDE(samples, bandwidth)


def wilson_ci(successes: int, n: int, level: float = 0.95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if n < 1 or not 0 <= successes <= n:
        raise PreconditionError(f"need 0 <= successes <= n and n >= 1, got {successes}/{n}")
    z = float(ndtri(0.5 + level / 2.0))
    p = successes / n
    z2n = z * z / n
    denom = 1.0 + z2n
    center = (p + z2n / 2.0) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi
