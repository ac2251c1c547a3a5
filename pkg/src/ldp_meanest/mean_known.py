"""Confidence intervals and a Z-test for the mean of Gaussian data with known variance.

Two phases over disjoint users: a bit-flipping histogram over width-sigma
bins locates the mean to within two standard deviations, then the remaining
users report clipped values with Gaussian noise and the noisy average is
turned into an interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError, DomainError, InsufficientSampleError
from .intervals import ConfidenceInterval, Method
from .mechanisms import (
    HistogramEstimate,
    PrivacyParams,
    bf_debias_sums,
    bf_report_sums,
    bin_indices,
    debias_coefficient,
    gaussian_noise_variance,
    project,
)
from .normal_math import RngStream, std_normal_inv_cdf
from .pool import UserPool

# Phase-one constant: 2 / alpha^2 with alpha = 0.05, half the gap between the
# largest and third-largest bin of a unit-width Gaussian histogram.
PHASE1_CONSTANT = 800.0


@dataclass(frozen=True)
class KnownVarConfig:
    """Parameters of the known-variance estimator.

    Attributes:
        sigma: Known standard deviation of the data.
        beta: Failure probability; the interval has confidence ``1 - beta``.
        privacy: Per-user budget. ``delta`` must be in (0, 1) for Gaussian noise.
        R: A priori bound on the mean, ``|mu| <= R``.
        enforce_sample_bound: Refuse to run below :func:`min_sample_size_known`.
            Turning this off runs the algorithm outside its coverage guarantee.
        phase1_cap: Optional fraction of the pool that caps the histogram
            phase, for pools smaller than the phase-one size.
        noise: ``"gaussian"`` or ``"laplace"``; Laplace noise gives pure
            eps-LDP but the output no longer supports :func:`ztest`.
    """

    sigma: float
    beta: float
    privacy: PrivacyParams
    R: float
    enforce_sample_bound: bool = True
    phase1_cap: float | None = None
    noise: str = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.beta < 0.5:
            raise DomainError(f"beta must lie in (0, 1/2), got {self.beta}")
        if not self.R > 0:
            raise DomainError(f"R must be positive, got {self.R}")
        if self.noise not in ("gaussian", "laplace"):
            raise ConfigurationError(f"unknown noise {self.noise!r}")
        if self.noise == "gaussian" and not 0.0 < self.privacy.delta < 1.0:
            raise DomainError("Gaussian noise needs delta in (0, 1)")
        if self.phase1_cap is not None and not 0.0 < self.phase1_cap < 1.0:
            raise ConfigurationError("phase1_cap must lie in (0, 1)")

    @property
    def half_bins(self) -> int:
        return math.ceil(self.R / self.sigma)

    @property
    def d(self) -> int:
        return 2 * self.half_bins + 1

    def bins(self) -> np.ndarray:
        """The d half-open bins ``[(i - 1/2) sigma, (i + 1/2) sigma)``, i = -k..k."""
        i = np.arange(-self.half_bins, self.half_bins + 1, dtype=float)
        return np.column_stack(((i - 0.5) * self.sigma, (i + 0.5) * self.sigma))

    def phase1_formula(self) -> int:
        coef = debias_coefficient(self.privacy.epsilon / 2.0)
        return math.ceil(PHASE1_CONSTANT * coef**2 * math.log(8.0 * self.d / self.beta))

    def phase1_size(self, n: int) -> int:
        n1 = self.phase1_formula()
        if self.phase1_cap is not None:
            n1 = min(n1, max(1, math.floor(self.phase1_cap * n)))
        return n1


@dataclass
class ZTestResult:
    mu_tilde: float
    sampling_sd: float
    z_score: float
    p_value: float
    reject: bool
    significance: float
    interval: ConfidenceInterval

    def to_dict(self) -> dict:
        return {
            "mu_tilde": self.mu_tilde,
            "sampling_sd": self.sampling_sd,
            "z_score": self.z_score,
            "p_value": self.p_value,
            "reject": self.reject,
            "significance": self.significance,
            "interval": self.interval.to_dict(),
        }


def min_sample_size_known(cfg: KnownVarConfig) -> int:
    """Pool size at which the coverage guarantee kicks in (twice the phase-one size)."""
    coef = debias_coefficient(cfg.privacy.epsilon / 2.0)
    return math.ceil(2 * PHASE1_CONSTANT * coef**2 * math.log(8.0 * cfg.d / cfg.beta))


def clip_half_width(sigma: float, n: int, beta: float) -> float:
    """2 sigma + sigma sqrt(2 log(8n / beta)); n is the full pool size."""
    return 2.0 * sigma + sigma * math.sqrt(2.0 * math.log(8.0 * n / beta))


def locate_mean_bin(pool: UserPool, cfg: KnownVarConfig, n1: int, rng: RngStream) -> tuple[int, HistogramEstimate]:
    """Histogram phase: returns ``(j_star, histogram)``.

    ``j_star`` is the signed bin index, so ``j_star * sigma`` is the bin centre.
    """
    eps = cfg.privacy.epsilon
    values = pool.take(n1, "bit_flipping", eps)
    idx = bin_indices(values, cfg.bins())
    hist = bf_debias_sums(bf_report_sums(idx, cfg.d, eps, rng), n1, eps)
    return hist.argmax() - cfg.half_bins, hist


def noisy_average(
    pool: UserPool,
    n_users: int,
    interval: tuple[float, float],
    privacy: PrivacyParams,
    rng: RngStream,
    noise: str = "gaussian",
) -> tuple[float, float]:
    """Clip-and-noise phase: returns the noisy mean and the per-user noise variance."""
    s1, s2 = interval
    eps = privacy.epsilon
    if noise == "gaussian":
        values = pool.take(n_users, "gaussian", eps, privacy.delta)
        var = gaussian_noise_variance(s1, s2, eps, privacy.delta)
        draws = rng.generator.normal(0.0, math.sqrt(var), size=n_users)
    else:
        values = pool.take(n_users, "laplace", eps)
        scale = (s2 - s1) / eps
        var = 2.0 * scale**2
        draws = rng.generator.laplace(0.0, scale, size=n_users)
    clipped = project(values, s1, s2)
    assert np.all((clipped >= s1) & (clipped <= s2))
    return float(np.mean(clipped + draws)), var


def known_bf(pool: UserPool, cfg: KnownVarConfig, rng: RngStream) -> ConfidenceInterval:
    """``1 - beta`` confidence interval for mu using every remaining user of ``pool``."""
    n = pool.remaining
    if cfg.R < cfg.sigma / 2:
        raise ConfigurationError("need R >= sigma / 2")
    if cfg.enforce_sample_bound:
        need = min_sample_size_known(cfg)
        if n < need:
            raise InsufficientSampleError(
                f"known-variance interval needs n >= {need} users, pool has {n}", need, n
            )
    n1 = cfg.phase1_size(n)
    n2 = n - n1
    if n2 < 1:
        raise InsufficientSampleError(
            f"phase one alone needs {n1} users, pool has {n}", n1 + 1, n
        )

    j_star, _ = locate_mean_bin(pool, cfg, n1, rng.substream(1))

    delta_hw = clip_half_width(cfg.sigma, n, cfg.beta)
    s1, s2 = j_star * cfg.sigma - delta_hw, j_star * cfg.sigma + delta_hw
    mu_tilde, noise_var = noisy_average(pool, n2, (s1, s2), cfg.privacy, rng.substream(2), cfg.noise)

    sampling_var = (cfg.sigma**2 + noise_var) / n2
    tau = math.sqrt(sampling_var) * std_normal_inv_cdf(1.0 - cfg.beta / 8.0)
    lo, hi = max(mu_tilde - tau, -cfg.R), min(mu_tilde + tau, cfg.R)
    empty = lo > hi
    if empty:
        # the noisy centre is further than tau outside [-R, R]; keep the nearest bound
        lo = hi = cfg.R if mu_tilde > 0 else -cfg.R
    return ConfidenceInterval(
        lo=lo,
        hi=hi,
        confidence=1.0 - cfg.beta,
        mu_tilde=mu_tilde,
        sigma_tilde_sq=sampling_var,
        method=Method.KNOWN_BF,
        details={
            "n1": n1,
            "n2": n2,
            "j_star": j_star,
            "clip_interval": [s1, s2],
            "noise_var": noise_var,
            "tau": tau,
            "noise": cfg.noise,
            "empty_intersection": empty,
        },
    )


def ztest(
    pool: UserPool,
    cfg: KnownVarConfig,
    mu0: float,
    significance: float,
    rng: RngStream,
) -> ZTestResult:
    """Two-sided private Z-test of ``H0: mu = mu0``.

    The test is only meaningful for ``significance > beta``: the underlying
    interval is itself only correct up to probability ``beta``.
    """
    if not 0.0 < significance < 1.0:
        raise DomainError("significance must lie in (0, 1)")
    if significance <= cfg.beta:
        raise ContractError(
            f"significance {significance} must exceed beta {cfg.beta}; the private "
            "estimate cannot certify more than 1 - beta confidence"
        )
    if cfg.noise != "gaussian":
        raise ContractError("the Z-test needs Gaussian noise in the second phase")
    ci = known_bf(pool, cfg, rng)
    sd = math.sqrt(ci.sigma_tilde_sq)
    z = (ci.mu_tilde - mu0) / sd
    p_value = math.erfc(abs(z) / math.sqrt(2.0))
    return ZTestResult(ci.mu_tilde, sd, z, p_value, p_value < significance, significance, ci)
