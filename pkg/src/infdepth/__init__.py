"""Simulation laboratory for finite-width residual networks at random
initialization and their infinite-depth stochastic limits."""

from .activations import IDENTITY, RELU, ActivationSpec, parse_activation
from .errors import (
    ConvergenceError,
    DomainError,
    InfDepthError,
    NotPSDError,
    PreconditionError,
    UnsupportedError,
)
from .numerics import RngStream
from .paths import Path
from .resnet import (
    NetworkConfig,
    collapse_probability,
    correlation_path,
    forward,
    forward_multi,
    gradient_norms,
    sample_states,
)
from .sde import SdeConfig, euler_path, euler_path_multi, euler_paths
from .stats import MonteCarloSummary, summarize

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec",
    "parse_activation",
    "RELU",
    "IDENTITY",
    "RngStream",
    "Path",
    "NetworkConfig",
    "forward",
    "forward_multi",
    "sample_states",
    "collapse_probability",
    "correlation_path",
    "gradient_norms",
    "SdeConfig",
    "euler_path",
    "euler_path_multi",
    "euler_paths",
    "MonteCarloSummary",
    "summarize",
    "InfDepthError",
    "PreconditionError",
    "DomainError",
    "NotPSDError",
    "ConvergenceError",
    "UnsupportedError",
]
