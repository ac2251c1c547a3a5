"""Locally differentially private mean and quantile estimation for Gaussian data."""

from .errors import (
    ConfigurationError,
    ContractError,
    DomainError,
    EstimationFailure,
    InsufficientSampleError,
    LDPError,
    OneShotViolation,
    PoolExhaustedError,
)
from .intervals import ConfidenceInterval, Method
from .mean_known import KnownVarConfig, ZTestResult, known_bf, min_sample_size_known, ztest
from .mean_unknown import (
    Regime,
    UnknownVarConfig,
    detect_regime,
    estimate_mean_auto,
    large_var,
    min_sample_size_unknown,
    unk_var,
)
from .mechanisms import PrivacyParams
from .normal_math import RngStream, std_normal_cdf, std_normal_inv_cdf
from .pool import UserPool
from .quantile import QuantileQuery, QuantileResult, Termination, bin_rr

__all__ = [
    "ConfidenceInterval",
    "ConfigurationError",
    "ContractError",
    "DomainError",
    "EstimationFailure",
    "InsufficientSampleError",
    "KnownVarConfig",
    "LDPError",
    "Method",
    "OneShotViolation",
    "PoolExhaustedError",
    "PrivacyParams",
    "QuantileQuery",
    "QuantileResult",
    "Regime",
    "RngStream",
    "Termination",
    "UnknownVarConfig",
    "UserPool",
    "ZTestResult",
    "bin_rr",
    "detect_regime",
    "estimate_mean_auto",
    "known_bf",
    "large_var",
    "min_sample_size_known",
    "min_sample_size_unknown",
    "std_normal_cdf",
    "std_normal_inv_cdf",
    "unk_var",
    "ztest",
]
