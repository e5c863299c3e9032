"""Closed-form limiting predictions used as Monte Carlo targets.

Every helper returns plain floats; :class:`TheoryPrediction` wraps one
value with a label and the name of the result it comes from, for
embedding into experiment reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError

__all__ = [
    "TheoryPrediction",
    "relu_log_growth_mean",
    "relu_log_growth_var_bound",
    "var_bound_gamma",
    "piecewise_mean_drift",
    "collapse_prob_init",
    "sequential_limit_variance",
    "sequential_limit_norm_ratio",
    "ou_marginal_params",
    "ou_rate",
    "gbm_log_params",
]

MEAN_VARIANTS = ("main", "appendix")
LIMIT_VARIANTS = ("as_stated", "reconciled")
LIMIT_ORDERS = ("depth_then_width", "width_then_depth")


@dataclass(frozen=True)
class TheoryPrediction:
    label: str
    kind: str
    value: object
    source: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.value)):
            raise PreconditionError(f"prediction {self.label!r} is not finite")
        if not self.source:
            raise PreconditionError("prediction source must be nonempty")

    def to_dict(self) -> dict:
        value = np.asarray(self.value, dtype=float)
        return {"label": self.label, "kind": self.kind,
                "value": float(value) if value.ndim == 0 else value.tolist(),
                "source": self.source}


def _interval(s, t):
    if not 0.0 <= s <= t:
        raise PreconditionError(f"need 0 <= s <= t, got s={s}, t={t}")
    return t - s


def _survival(n):
    # probability that at least one of n symmetric coordinates is positive
    return -math.expm1(-n * math.log(2.0))


def relu_log_growth_mean(n: int, s: float = 0.0, t: float = 1.0, variant: str = "main") -> float:
    """Mean of ``log(|phi(X_t)| / |phi(X_s)|)`` for ReLU at width ``n``.

    ``main``:     ((1 - 2^-n)^-1 / 4 - 1/n)(t - s)
    ``appendix``: ((1 - 2^-n) / 4 - 1/n)(t - s)

    Both are conditional on non-collapse at time ``s``.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    dt = _interval(s, t)
    q = _survival(n)
    if variant == "main":
        rate = 0.25 / q - 1.0 / n
    elif variant == "appendix":
        rate = 0.25 * q - 1.0 / n
    else:
        raise PreconditionError(f"unknown variant {variant!r}; expected one of {MEAN_VARIANTS}")
    return rate * dt


def var_bound_gamma(n: int, s: float, t: float, p2_curve) -> float:
    """Trapezoidal ``Gamma_{s,t}`` from samples of ``p2(u) = E phi'(X^1_u) phi'(X^2_u)``.

    ``Gamma = 1/4 int_s^t (p2 - q^2/4) + (q/2 - p2) / n du`` with
    ``q = 1 - 2^-n``; ``p2_curve`` holds values on an even grid over
    ``[s, t]`` (a single value is read as a constant). The result is
    clipped at 0.
    """
    dt = _interval(s, t)
    p2 = np.asarray(p2_curve, dtype=float).ravel()
    if p2.size == 0:
        raise PreconditionError("p2 curve is empty")
    if np.any((p2 < 0) | (p2 > 1)):
        raise PreconditionError("p2 values must lie in [0, 1]")
    q = _survival(n)
    integrand = 0.25 * ((p2 - q * q / 4.0) + (q / 2.0 - p2) / n)
    if p2.size == 1:
        total = float(integrand[0]) * dt
    else:
        total = float(np.trapezoid(integrand, np.linspace(s, t, p2.size)))
    return max(total, 0.0)


def relu_log_growth_var_bound(n: int, s: float, t: float, p2_curve) -> float:
    """Upper bound ``(n^-1/2 + Gamma^1/2)^2 (t - s)`` on the log-growth variance."""
    if n < 2:
        raise PreconditionError("the variance bound needs n >= 2")
    gamma = var_bound_gamma(n, s, t, p2_curve)
    return (1.0 / math.sqrt(n) + math.sqrt(gamma)) ** 2 * (t - s)


def piecewise_mean_drift(alpha: float, beta: float, n: int) -> float:
    """Mean log growth per unit time of ``|phi(X)|`` for ``alpha relu(z) + beta relu(-z)``.

    With one slope zero the activation can collapse, and the surviving
    coordinate mass carries the factor ``1 - 2^-n``.
    """
    if alpha == 0 and beta == 0:
        raise DomainError("(alpha, beta) = (0, 0) has no growth rate")
    if n < 1:
        raise PreconditionError("n must be >= 1")
    q = _survival(n)
    if alpha == 0:
        return beta * beta * q / 4.0 - 1.0 / n
    if beta == 0:
        return alpha * alpha * q / 4.0 - 1.0 / n
    return (alpha * alpha + beta * beta) / 4.0 - 1.0 / n


def collapse_prob_init(n: int) -> float:
    """Probability ``2^-n`` that every coordinate of ``Y_0`` is nonpositive."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    return math.ldexp(1.0, -n)


def _check_limit(t, order, variant):
    if not 0.0 <= t <= 1.0:
        raise PreconditionError("t must lie in [0, 1]")
    if order not in LIMIT_ORDERS:
        raise PreconditionError(f"unknown order {order!r}; expected one of {LIMIT_ORDERS}")
    if variant not in LIMIT_VARIANTS:
        raise PreconditionError(f"unknown variant {variant!r}; expected one of {LIMIT_VARIANTS}")


def sequential_limit_variance(t: float, order: str = "depth_then_width",
                              variant: str = "as_stated") -> float:
    """Coordinate variance at time ``t`` as a multiple of ``|x|^2 / d``.

    ``as_stated`` gives ``e^{t/2}`` when depth goes first and ``e^t`` when
    width goes first; ``reconciled`` gives ``e^{t/2}`` for both orders.
    """
    _check_limit(t, order, variant)
    if order == "width_then_depth" and variant == "as_stated":
        return math.exp(t)
    return math.exp(t / 2.0)


def sequential_limit_norm_ratio(t: float, order: str = "depth_then_width",
                                variant: str = "as_stated") -> float:
    """Limit of ``|Y_t| / |Y_0|`` (equivalently of the post-activation norms).

    ``as_stated``: ``e^{t/4}`` depth first, ``e^{t/2}`` width first;
    ``reconciled``: ``e^{t/4}`` for both.
    """
    _check_limit(t, order, variant)
    if order == "width_then_depth" and variant == "as_stated":
        return math.exp(t / 2.0)
    return math.exp(t / 4.0)


def ou_rate(alpha: float = 1.0) -> float:
    """Mean-reversion rate ``a = pi alpha^2 / 4`` of the exotic-activation OU."""
    return math.pi * alpha * alpha / 4.0


def ou_marginal_params(g_x0: float, alpha: float = 1.0, t: float = 1.0) -> tuple:
    """Mean and variance of ``g(X_t)`` for the exotic activation.

    ``(g_x0 e^{-a t}, (pi/2)(1 - e^{-2 a t}) alpha^2)`` with ``a = pi alpha^2 / 4``;
    the noise level is ``sigma = 2a``, so the stationary variance
    ``sigma^2 / (2a)`` equals ``2a``.
    """
    if t < 0:
        raise PreconditionError("t must be >= 0")
    a = ou_rate(alpha)
    return g_x0 * math.exp(-a * t), 2.0 * a * -math.expm1(-2.0 * a * t)


def gbm_log_params(x0: float, a: float, sigma: float, t: float) -> tuple:
    """Mean and variance of ``log X_t`` for the GBM ``dX = a X dt + sigma X dB``."""
    if not x0 > 0:
        raise DomainError("x0 must be positive")
    return math.log(x0) + (a - 0.5 * sigma * sigma) * t, sigma * sigma * t
