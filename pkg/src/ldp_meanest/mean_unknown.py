"""Mean confidence intervals when the variance is unknown.

Covers the bounded-variance pipeline (two private quantile searches, then a
clipped noisy average), the very-large-variance estimator that interpolates
mu from two tail masses, and the detector that chooses between them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConfigurationError, DomainError, EstimationFailure, InsufficientSampleError
from .intervals import ConfidenceInterval, Method
from .mean_known import noisy_average
from .mechanisms import PrivacyParams, debias_coefficient, rr_estimate_fraction, rr_sample_size
from .normal_math import RngStream, std_normal_cdf, std_normal_inv_cdf
from .pool import UserPool
from .quantile import QuantileQuery, bin_rr

LAMBDA_MEDIAN = 0.098
LAMBDA_SD = 0.052
P_ONE_SD = std_normal_cdf(1.0)

REGIME_THRESHOLD = 0.76
REGIME_ACCURACY = 0.07

GUARD_MULTIPLIER = 800.0
CLAMP_EPS = 1e-10


class Regime(str, enum.Enum):
    BOUNDED_VARIANCE = "BoundedVariance"
    LARGE_VARIANCE = "LargeVariance"


@dataclass(frozen=True)
class UnknownVarConfig:
    sigma_min: float
    sigma_max: float
    beta: float
    privacy: PrivacyParams
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError("R must be positive")
        if not self.sigma_min > 0:
            raise DomainError("sigma_min must be positive")
        if not self.sigma_min <= self.sigma_max <= 2 * self.R:
            raise ConfigurationError(
                f"need sigma_min <= sigma_max <= 2R, got {self.sigma_min}, {self.sigma_max}, R={self.R}"
            )
        if not 0.0 < self.beta < 0.5:
            raise DomainError("beta must lie in (0, 1/2)")
        if not 0.0 < self.privacy.delta < 1.0:
            raise DomainError("the noisy-average phase needs delta in (0, 1)")


@dataclass
class RegimeDecision:
    decision: Regime
    fraction_estimate: float
    users_consumed: int


@dataclass(frozen=True)
class UnkVarPlan:
    """Phase sizes of the bounded-variance pipeline."""

    T_med: int
    T_sd: int
    n1: int
    n2: int
    aggregate_bound: int

    @property
    def min_n(self) -> int:
        return max(self.n1 + self.n2 + 1, self.aggregate_bound)


def _ceil_log2(x: float) -> int:
    T = math.ceil(math.log2(x))
    if 2 ** (T - 1) >= x:
        T -= 1
    return max(T, 1)


def unk_var_plan(cfg: UnknownVarConfig) -> UnkVarPlan:
    coef2 = debias_coefficient(cfg.privacy.epsilon) ** 2
    T_med = _ceil_log2(8 * cfg.R / cfg.sigma_min)
    T_sd = _ceil_log2((8 * cfg.R + 4 * cfg.sigma_max) / cfg.sigma_min)
    n1 = math.ceil(T_med / LAMBDA_MEDIAN**2 * coef2 * math.log(16 * T_med / cfg.beta))
    n2 = math.ceil(T_sd / LAMBDA_SD**2 * coef2 * math.log(16 * T_sd / cfg.beta))
    L = math.log2(16 * cfg.R / cfg.sigma_min)
    agg = math.ceil(1500 * L * coef2 * math.log(16 * L / cfg.beta))
    return UnkVarPlan(T_med, T_sd, n1, n2, agg)


def min_sample_size_unknown(cfg: UnknownVarConfig) -> int:
    """Stricter of the per-phase sizes and the aggregate sample bound."""
    return unk_var_plan(cfg).min_n


def detection_sample_size(epsilon: float, beta: float) -> int:
    return rr_sample_size(REGIME_ACCURACY, beta, epsilon)


def detect_regime(pool: UserPool, epsilon: float, beta: float, R: float, rng: RngStream) -> RegimeDecision:
    """Decide bounded (sigma < 2R) vs large (sigma > R) variance from P[|X| <= 2R]."""
    m = detection_sample_size(epsilon, beta)
    frac = rr_estimate_fraction(
        pool, m, lambda x: abs(x) <= 2 * R, epsilon, rng, mechanism="regime_rr"
    )
    regime = Regime.BOUNDED_VARIANCE if frac >= REGIME_THRESHOLD else Regime.LARGE_VARIANCE
    return RegimeDecision(regime, frac, m)


def unk_var(pool: UserPool, cfg: UnknownVarConfig, rng: RngStream) -> ConfidenceInterval:
    """Confidence interval for mu with sigma only known to lie in [sigma_min, sigma_max]."""
    n = pool.remaining
    plan = unk_var_plan(cfg)
    if n < plan.min_n:
        raise InsufficientSampleError(
            f"unknown-variance interval needs n >= {plan.min_n} users, pool has {n}", plan.min_n, n
        )
    eps, R = cfg.privacy.epsilon, cfg.R

    median_query = QuantileQuery(0.5, -R, R, LAMBDA_MEDIAN, plan.T_med)
    res_mu = bin_rr(pool.reserve(plan.n1), median_query, eps, rng.substream(1))
    sd_query = QuantileQuery(P_ONE_SD, -R, R + cfg.sigma_max, LAMBDA_SD, plan.T_sd)
    res_sd = bin_rr(pool.reserve(plan.n2), sd_query, eps, rng.substream(2))
    t_mu, t_sigma = res_mu.threshold, res_sd.threshold
    if t_sigma <= t_mu:
        raise EstimationFailure(
            f"one-sd threshold {t_sigma:.6g} is not above the median estimate {t_mu:.6g}"
        )

    gap = t_sigma - t_mu
    delta_hw = gap * (0.5 + 2.0 * math.sqrt(2.0 * math.log(8.0 * n / cfg.beta)))
    s1, s2 = t_mu - delta_hw, t_mu + delta_hw
    n3 = pool.remaining
    mu_tilde, noise_var = noisy_average(pool, n3, (s1, s2), cfg.privacy, rng.substream(3))

    # 2 * gap bounds sigma from above whenever both searches succeed
    sigma_proxy = 2.0 * gap
    sampling_var = (sigma_proxy**2 + noise_var) / n3
    tau = math.sqrt(sampling_var) * std_normal_inv_cdf(1.0 - cfg.beta / 8.0)
    lo, hi = max(mu_tilde - tau, -R), min(mu_tilde + tau, R)
    if lo > hi:
        lo = hi = R if mu_tilde > 0 else -R
    return ConfidenceInterval(
        lo=lo,
        hi=hi,
        confidence=1.0 - cfg.beta,
        mu_tilde=mu_tilde,
        sigma_tilde_sq=sampling_var,
        method=Method.UNK_VAR,
        details={
            "t_mu_hat": t_mu,
            "t_sigma_hat": t_sigma,
            "sigma_proxy": sigma_proxy,
            "clip_interval": [s1, s2],
            "noise_var": noise_var,
            "tau": tau,
            "iterations": [res_mu.iterations_used, res_sd.iterations_used],
            "users_per_phase": [plan.n1, plan.n2, n3],
            "guard_fired": False,
        },
    )


def interpolate_mean(p_minus: float, p_plus: float, R: float) -> tuple[float, float, float, float]:
    """Recover ``(mu, sigma, t_minus, t_plus)`` from P[X <= -R] and P[X <= R]."""
    t_minus = std_normal_inv_cdf(p_minus)
    t_plus = std_normal_inv_cdf(p_plus)
    if not t_plus > t_minus:
        raise EstimationFailure("tail quantiles are not ordered")
    span = t_plus - t_minus
    return R * (-t_plus - t_minus) / span, 2.0 * R / span, t_minus, t_plus


def large_var_width_bound(sigma: float, epsilon: float, beta: float, n: int) -> float:
    """20000 sigma coef sqrt(log(8/beta)/n), the width guaranteed w.p. 1 - beta."""
    return 20000.0 * sigma * debias_coefficient(epsilon) * math.sqrt(math.log(8.0 / beta) / n)


def large_var(pool: UserPool, epsilon: float, R: float, beta: float, rng: RngStream) -> ConfidenceInterval:
    """Interval for mu when sigma > R, from private estimates of P[X <= -R] and P[X <= R]."""
    n = pool.remaining
    if n < 2:
        raise InsufficientSampleError("large-variance estimator needs at least 2 users", 2, n)
    if not 0.0 < beta < 0.5:
        raise DomainError("beta must lie in (0, 1/2)")
    n_minus, n_plus = n - n // 2, n // 2
    p_minus = rr_estimate_fraction(pool, n_minus, lambda x: x <= -R, epsilon, rng.substream(1),
                                   mechanism="tail_rr")
    p_plus = rr_estimate_fraction(pool, n_plus, lambda x: x <= R, epsilon, rng.substream(2),
                                  mechanism="tail_rr")
    B = math.sqrt(debias_coefficient(epsilon) ** 2 * math.log(8.0 / beta) / n)
    details = {
        "p_minus": p_minus,
        "p_plus": p_plus,
        "B": B,
        "users_per_phase": [n_minus, n_plus],
    }
    if p_plus - p_minus < GUARD_MULTIPLIER * B:
        details["guard_fired"] = True
        return ConfidenceInterval(-R, R, 1.0 - beta, 0.0, None, Method.TRIVIAL_FULL_RANGE, details)

    clamped = [min(max(p, CLAMP_EPS), 1.0 - CLAMP_EPS) for p in (p_minus, p_plus)]
    mu_tilde, _, t_minus, t_plus = interpolate_mean(clamped[0], clamped[1], R)
    tau = 9.0 * R * B / (t_plus - t_minus)
    details.update(guard_fired=False, t_minus=t_minus, t_plus=t_plus, tau=tau,
                   clamped=clamped != [p_minus, p_plus])
    return ConfidenceInterval(mu_tilde - tau, mu_tilde + tau, 1.0 - beta, mu_tilde, None,
                              Method.LARGE_VAR, details)


def estimate_mean_auto(
    pool: UserPool,
    sigma_min: float,
    beta: float,
    privacy: PrivacyParams,
    R: float,
    rng: RngStream,
) -> ConfidenceInterval:
    """Detect the variance regime on a prefix of users, then run the matching estimator."""
    regime = detect_regime(pool, privacy.epsilon, beta, R, rng.substream(1))
    if regime.decision is Regime.BOUNDED_VARIANCE:
        cfg = UnknownVarConfig(sigma_min, 2 * R, beta, privacy, R)
        ci = unk_var(pool, cfg, rng.substream(2))
    else:
        ci = large_var(pool, privacy.epsilon, R, beta, rng.substream(3))
    ci.details["regime"] = regime.decision.value
    ci.details["regime_fraction"] = regime.fraction_estimate
    ci.details["users_per_phase"] = [regime.users_consumed, *ci.details["users_per_phase"]]
    return ci
