"""Local randomizers and their debiased estimators.

Randomized response on bits, bit flipping on one-hot histograms, and the
clipped additive-noise mechanisms, together with the sample-size calculators
that go with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .normal_math import RngStream
from .pool import UserPool


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise DomainError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise DomainError(f"delta must lie in [0, 1), got {self.delta}")


@dataclass
class HistogramEstimate:
    """Debiased bin counts; entries can be negative or exceed ``n``."""

    estimates: np.ndarray
    n: int

    @property
    def d(self) -> int:
        return len(self.estimates)

    @property
    def frequencies(self) -> np.ndarray:
        return self.estimates / self.n

    def argmax(self) -> int:
        # np.argmax returns the first maximum, i.e. the lowest index on ties
        return int(np.argmax(self.estimates))


def _check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    return epsilon


def _check_unit_open_half(name: str, value: float):
    if not 0.0 < value < 0.5:
        raise DomainError(f"{name} must lie in (0, 1/2), got {value}")


def keep_probability(epsilon: float) -> float:
    """e^eps / (1 + e^eps), the chance randomized response reports the truth."""
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    return 1.0 / (1.0 + math.exp(-epsilon))


def debias_coefficient(epsilon: float) -> float:
    """(e^eps + 1) / (e^eps - 1)."""
    # equals coth(eps/2); this form does not overflow for large eps
    return 1.0 / math.tanh(_check_epsilon(epsilon) / 2.0)


def rr_probability_table(epsilon: float) -> np.ndarray:
    """``table[b_in, b_out]`` = P[RR(b_in) = b_out]."""
    q = keep_probability(epsilon)
    return np.array([[q, 1.0 - q], [1.0 - q, q]])


# -- randomized response ---------------------------------------------------


def rr_flip(bit: int, epsilon: float, rng: RngStream) -> int:
    if bit not in (0, 1):
        raise DomainError(f"bit must be 0 or 1, got {bit}")
    q = keep_probability(_check_epsilon(epsilon))
    return bit if rng.generator.random() < q else 1 - bit


def rr_flip_bits(bits, epsilon: float, rng: RngStream) -> np.ndarray:
    """Vectorised :func:`rr_flip`: each entry kept independently w.p. e^eps/(1+e^eps)."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise DomainError("bits must be 0/1")
    q = keep_probability(_check_epsilon(epsilon))
    keep = rng.generator.random(bits.shape) < q
    return np.where(keep, bits, 1 - bits).astype(np.int8)


def rr_expected_sum(m: float, n: int, epsilon: float) -> float:
    """Expected number of reported ones when ``m`` of ``n`` inputs are ones."""
    e = math.exp(epsilon)
    return n / (1.0 + e) + m * (e - 1.0) / (1.0 + e)


def rr_debias(report_sum: float, n: int, epsilon: float) -> float:
    """Unbiased count of true ones from the sum of ``n`` randomized reports."""
    epsilon = _check_epsilon(epsilon)
    if n < 0 or not 0 <= report_sum <= n:
        raise DomainError(f"report_sum must lie in [0, n]; got {report_sum} with n={n}")
    return debias_coefficient(epsilon) * report_sum - n / math.expm1(epsilon)


def rr_estimate_fraction(
    pool: UserPool,
    m: int,
    predicate: Callable[[np.ndarray], np.ndarray],
    epsilon: float,
    rng: RngStream,
    mechanism: str = "randomized_response",
) -> float:
    """Private estimate of P[predicate(X)] from the next ``m`` users of ``pool``.

    ``predicate`` maps an array of user values to a boolean array. The raw
    debiased estimate is returned; it can fall outside [0, 1].
    """
    epsilon = _check_epsilon(epsilon)
    if m < 1:
        raise ConfigurationError("rr_estimate_fraction needs at least one user")
    values = pool.take(m, mechanism, epsilon)
    bits = np.asarray(predicate(values), dtype=np.int8)
    reports = rr_flip_bits(bits, epsilon, rng)
    return rr_debias(int(reports.sum()), m, epsilon) / m


def rr_sample_size(alpha: float, beta: float, epsilon: float) -> int:
    """Users needed for an alpha-accurate fraction estimate w.p. 1 - beta."""
    _check_unit_open_half("alpha", alpha)
    _check_unit_open_half("beta", beta)
    coef = debias_coefficient(epsilon)
    return math.ceil(2.0 / alpha**2 * coef**2 * math.log(4.0 / beta))


# -- bit flipping ----------------------------------------------------------


def check_bins(bins: Sequence[tuple[float, float]]) -> np.ndarray:
    """Validate a list of half-open ``[lo, hi)`` intervals; returns them as an (d, 2) array."""
    arr = np.asarray(bins, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
        raise ConfigurationError("bins must be a non-empty list of (lo, hi) pairs")
    if np.any(arr[:, 1] <= arr[:, 0]):
        raise ConfigurationError("every bin needs lo < hi")
    order = np.argsort(arr[:, 0], kind="stable")
    srt = arr[order]
    if np.any(srt[1:, 0] < srt[:-1, 1]):
        raise ConfigurationError("bins overlap")
    return arr


def bin_indices(x, bins: np.ndarray) -> np.ndarray:
    """Index of the ``[lo, hi)`` bin holding each value, or -1 when none does."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.argsort(bins[:, 0], kind="stable")
    lows = bins[order, 0]
    highs = bins[order, 1]
    pos = np.searchsorted(lows, x, side="right") - 1
    ok = pos >= 0
    ok[ok] = x[ok] < highs[pos[ok]]
    return np.where(ok, order[np.clip(pos, 0, None)], -1)


def bf_encode(x: float, bins) -> np.ndarray:
    """One-hot vector of the bin containing ``x``; all zeros outside every bin."""
    arr = check_bins(bins)
    out = np.zeros(len(arr), dtype=np.int8)
    j = bin_indices(x, arr)[0]
    if j >= 0:
        out[j] = 1
    return out


def bf_flip(onehot, epsilon: float, rng: RngStream) -> np.ndarray:
    """Randomized response at eps/2 on every coordinate independently.

    Works on a single vector or an ``(n, d)`` matrix of vectors.
    """
    return rr_flip_bits(onehot, _check_epsilon(epsilon) / 2.0, rng)


def bf_report_sums(indices, d: int, epsilon: float, rng: RngStream) -> np.ndarray:
    """Coordinate sums of the bit-flipping reports of users with bin ``indices``.

    ``indices`` holds each user's bin (``-1`` for the all-zero vector). The sum
    of independent per-coordinate flips is drawn directly as two binomials per
    coordinate, which has exactly the distribution of summing per-user reports.
    """
    q = keep_probability(_check_epsilon(epsilon) / 2.0)
    idx = np.asarray(indices)
    counts = np.bincount(idx[idx >= 0], minlength=d)[:d]
    n = idx.size
    gen = rng.generator
    return gen.binomial(counts, q) + gen.binomial(n - counts, 1.0 - q)


def bf_debias_sums(sums, n: int, epsilon: float) -> HistogramEstimate:
    """Debiased histogram from the coordinate sums of ``n`` reports."""
    half = _check_epsilon(epsilon) / 2.0
    coef = debias_coefficient(half)
    sums = np.asarray(sums, dtype=float)
    if n < 1:
        raise ConfigurationError("need at least one report")
    return HistogramEstimate(coef * (sums - n / (1.0 + math.exp(half))), int(n))


def bf_debias(reports, epsilon: float) -> HistogramEstimate:
    """Debiased histogram estimate from an ``(n, d)`` array of flipped reports."""
    try:
        arr = np.asarray(reports, dtype=float)
    except ValueError as exc:
        raise ConfigurationError("reports must all have the same dimension") from exc
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ConfigurationError("reports must be a non-empty (n, d) array")
    return bf_debias_sums(arr.sum(axis=0), arr.shape[0], epsilon)


def bf_sample_size(alpha: float, beta: float, epsilon: float, d: int) -> int:
    """Users for an alpha-accurate (sup norm) histogram over ``d`` bins w.p. 1 - beta."""
    if d < 1:
        raise DomainError("d must be at least 1")
    _check_unit_open_half("alpha", alpha)
    _check_unit_open_half("beta", beta)
    coef = debias_coefficient(_check_epsilon(epsilon) / 2.0)
    return math.ceil(2.0 / alpha**2 * coef**2 * math.log(4.0 * d / beta))


# -- additive noise --------------------------------------------------------


def project(x, s1: float, s2: float):
    """min(s2, max(s1, x))."""
    return np.minimum(s2, np.maximum(s1, x))


def gaussian_noise_variance(s1: float, s2: float, epsilon: float, delta: float) -> float:
    """2 l^2 log(2/delta) / eps^2 for an interval of length l = s2 - s1."""
    if not s1 < s2:
        raise ConfigurationError(f"need s1 < s2, got [{s1}, {s2}]")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    epsilon = _check_epsilon(epsilon)
    return 2.0 * (s2 - s1) ** 2 * math.log(2.0 / delta) / epsilon**2


def gaussian_mechanism(x, interval: tuple[float, float], epsilon: float, delta: float, rng: RngStream):
    """Clip ``x`` to ``interval`` and add calibrated Gaussian noise.

    ``x`` may be a scalar or an array (one entry per user).
    """
    s1, s2 = interval
    var = gaussian_noise_variance(s1, s2, epsilon, delta)
    clipped = project(np.asarray(x, dtype=float), s1, s2)
    noise = rng.generator.normal(0.0, math.sqrt(var), size=clipped.shape)
    out = clipped + noise
    return float(out) if out.ndim == 0 else out


def laplace_mechanism(x, interval: tuple[float, float], epsilon: float, rng: RngStream):
    """Clip to ``interval`` and add Laplace noise of scale (s2 - s1)/eps (pure eps-LDP)."""
    s1, s2 = interval
    if not s1 < s2:
        raise ConfigurationError(f"need s1 < s2, got [{s1}, {s2}]")
    scale = (s2 - s1) / _check_epsilon(epsilon)
    clipped = project(np.asarray(x, dtype=float), s1, s2)
    out = clipped + rng.generator.laplace(0.0, scale, size=clipped.shape)
    return float(out) if out.ndim == 0 else out
