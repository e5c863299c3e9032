"""Activation catalog.

Each :class:`ActivationSpec` knows its value map, its derivative and
whether it can produce exact zeros (the hard-zero family that allows
network collapse). Specs are addressable by name strings such as
``"relu"``, ``"piecewise:1.0:-1.0"``, ``"smooth_relu:10"`` or
``"exotic:1:0"``; see :func:`parse_activation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .errors import DomainError, PreconditionError
from .numerics import ERFI_MAX, erfi_inv

__all__ = [
    "ActivationSpec",
    "parse_activation",
    "RELU",
    "IDENTITY",
    "apply",
    "exotic_phi",
    "exotic_g",
    "exotic_g_inverse",
    "gbm_transform_g",
    "gbm_drift",
]

_KINDS = {
    "relu": 0,
    "piecewise_linear": 2,
    "linear": 2,
    "smooth_relu": 1,
    "exotic": 2,
    "tanh": 0,
    "gelu": 0,
    "swish": 0,
}
_ALIASES = {"piecewise": "piecewise_linear", "softplus_relu": "smooth_relu", "silu": "swish"}
_SQRT_PI = math.sqrt(math.pi)
_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class ActivationSpec:
    """A named activation with its parameters.

    ``piecewise_linear(a, b)`` is ``a * relu(z) + b * relu(-z)``, so
    ``(1, -1)`` is the identity and ``(1, 0)`` is ReLU. ``linear(a, b)`` is
    the affine map ``a * z + b``. ``smooth_relu(m)`` is the shifted softplus
    ``(log(1 + exp(m z)) - log 2) / m`` and ``exotic(a, b)`` is
    ``exp(erfi_inv(a z + b) ** 2)``.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in _KINDS:
            raise PreconditionError(f"unknown activation kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != _KINDS[kind]:
            raise PreconditionError(
                f"{kind} takes {_KINDS[kind]} parameter(s), got {len(params)}"
            )
        if kind == "smooth_relu" and not params[0] > 0:
            raise PreconditionError("smooth_relu sharpness m must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)

    @property
    def name(self) -> str:
        short = {"piecewise_linear": "piecewise"}.get(self.kind, self.kind)
        if not self.params:
            return short
        return ":".join([short] + [repr(p) for p in self.params])

    @property
    def hard_zero(self) -> bool:
        """True when the activation maps a set of positive measure to 0."""
        if self.kind == "relu":
            return True
        if self.kind == "piecewise_linear":
            a, b = self.params
            return a == 0.0 or b == 0.0
        return False

    def __call__(self, v):
        return self.value(v)

    def in_domain(self, v):
        """Elementwise mask of finite inputs on which :meth:`value` is defined."""
        z = np.asarray(v, dtype=float)
        ok = np.isfinite(z)
        if self.kind == "exotic":
            ok &= np.abs(self.params[0] * z + self.params[1]) <= ERFI_MAX
        return ok

    def value(self, v):
        z = np.asarray(v, dtype=float)
        kind, p = self.kind, self.params
        if kind == "relu":
            out = np.maximum(z, 0.0)
        elif kind == "piecewise_linear":
            out = p[0] * np.maximum(z, 0.0) + p[1] * np.maximum(-z, 0.0)
        elif kind == "linear":
            out = p[0] * z + p[1]
        elif kind == "smooth_relu":
            m = p[0]
            out = (np.logaddexp(0.0, m * z) - _LOG2) / m
        elif kind == "exotic":
            out = exotic_phi(p[0], p[1], z)
        elif kind == "tanh":
            out = np.tanh(z)
        elif kind == "gelu":
            out = z * ndtr(z)
        else:  # swish
            out = z * expit(z)
        return out

    def derivative(self, v):
        """Pointwise derivative; kinks take the value 0 (ReLU at 0)."""
        z = np.asarray(v, dtype=float)
        kind, p = self.kind, self.params
        if kind == "relu":
            out = (z > 0).astype(float)
        elif kind == "piecewise_linear":
            out = p[0] * (z > 0) - p[1] * (z < 0)
        elif kind == "linear":
            out = np.full_like(z, p[0])
        elif kind == "smooth_relu":
            out = expit(p[0] * z)
        elif kind == "exotic":
            # d/dy exp(u^2) with u = erfi_inv(a y + b) collapses to a sqrt(pi) u
            out = exotic_g(p[0], p[1], z)
        elif kind == "tanh":
            out = 1.0 - np.tanh(z) ** 2
        elif kind == "gelu":
            out = ndtr(z) + z * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        else:
            s = expit(z)
            out = s + z * s * (1.0 - s)
        return out


RELU = ActivationSpec("relu")
IDENTITY = ActivationSpec("piecewise_linear", (1.0, -1.0))


def parse_activation(text) -> ActivationSpec:
    """Build a spec from ``name[:p1[:p2]]``; ``identity`` means piecewise:1:-1."""
    if isinstance(text, ActivationSpec):
        return text
    parts = str(text).strip().split(":")
    name = parts[0].strip().lower()
    if name == "identity":
        if len(parts) > 1:
            raise PreconditionError("identity takes no parameters")
        return IDENTITY
    try:
        params = tuple(float(x) for x in parts[1:])
    except ValueError as exc:
        raise PreconditionError(f"bad activation parameters in {text!r}") from exc
    return ActivationSpec(name, params)


def apply(spec: ActivationSpec, v):
    """Coordinatewise application of ``spec`` to ``v``."""
    return spec.value(v)


def _exotic_arg(alpha, beta, y):
    arg = alpha * np.asarray(y, dtype=float) + beta
    if np.any(np.abs(arg) > ERFI_MAX):
        raise DomainError("exotic activation argument outside the erfi_inv domain")
    return arg


def exotic_phi(alpha: float, beta: float, y):
    """``exp(erfi_inv(alpha * y + beta) ** 2)``; always ``>= 1``."""
    u = erfi_inv(_exotic_arg(alpha, beta, y))
    return np.exp(np.square(u))


def exotic_g(alpha: float, beta: float, y):
    """Transform ``alpha * sqrt(pi) * erfi_inv(alpha * y + beta)``.

    Strictly increasing in ``y`` for ``alpha > 0``; maps the width-1 exotic
    network onto an Ornstein-Uhlenbeck process.
    """
    return alpha * _SQRT_PI * erfi_inv(_exotic_arg(alpha, beta, y))


def exotic_g_inverse(alpha: float, beta: float, value):
    """Inverse of :func:`exotic_g` in ``y``."""
    from .numerics import erfi

    u = np.asarray(value, dtype=float) / (alpha * _SQRT_PI)
    return (erfi(u) - beta) / alpha


def gbm_transform_g(alpha: float, beta: float, gamma: float, y):
    """``(alpha * y + beta) ** gamma`` for a strictly positive base."""
    base = alpha * np.asarray(y, dtype=float) + beta
    if np.any(base <= 0):
        raise DomainError("gbm transform needs alpha * y + beta > 0")
    out = np.power(base, gamma)
    return float(out) if np.ndim(out) == 0 else out


def gbm_drift(sigma: float, gamma: float) -> float:
    """Drift ``a = sigma^2 (gamma - 1) / (2 gamma)`` of the transformed process."""
    if gamma == 0:
        raise DomainError("gamma must be nonzero")
    return 0.5 * sigma * sigma * (gamma - 1.0) / gamma
