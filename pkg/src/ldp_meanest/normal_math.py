"""Gaussian and Laplace numerics plus the reproducible random streams.

Every randomized routine in the package draws from an explicit
:class:`RngStream`; nothing touches global numpy state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

_UINT64 = 2**64
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass
class RngStream:
    """A reproducible, splittable random stream.

    The stream is identified by ``(seed, stream_id)`` plus an optional path of
    sub-stream keys. Identical identifiers give bit-identical draws; distinct
    identifiers are mapped through numpy's ``SeedSequence`` hashing onto
    independent Philox counter streams.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()
    _generator: np.random.Generator | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        for name, value in (("seed", self.seed), ("stream_id", self.stream_id)):
            if not 0 <= int(value) < _UINT64:
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {value}")
        self.seed = int(self.seed)
        self.stream_id = int(self.stream_id)
        self.path = tuple(int(k) for k in self.path)

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
            self._generator = np.random.Generator(np.random.Philox(seq))
        return self._generator

    def substream(self, *keys: int) -> RngStream:
        """Child stream keyed by ``keys``; independent of the parent's draws."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(keys))


def _require_finite(x: float, name: str = "x") -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x}")
    return x


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF through the complementary error function."""
    x = _require_finite(x)
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


# Rational approximation of the inverse normal CDF (P. J. Acklam), relative
# error below 1.2e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        return num / den
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return num / den


def std_normal_inv_cdf(p: float) -> float:
    """Inverse standard normal CDF.

    Acklam's rational guess followed by Halley refinement against
    :func:`std_normal_cdf`. ``p`` must lie strictly inside (0, 1); the
    endpoints raise instead of returning infinities.
    """
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must lie in the open interval (0, 1), got {p}")
    if p > 0.5:
        # refine on the lower tail, where erfc keeps full relative precision
        return -std_normal_inv_cdf(1.0 - p)
    x = _acklam(p)
    for _ in range(2):
        err = 0.5 * math.erfc(-x / _SQRT2) - p
        u = err * _SQRT2PI * math.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def sample_gaussian(rng: RngStream, mu: float, sigma: float, size=None):
    """Draw from N(mu, sigma^2); ``size`` follows numpy conventions."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    return rng.generator.normal(mu, sigma, size=size)


def sample_laplace(rng: RngStream, scale: float, size=None):
    """Draw from a zero-centred Laplace distribution with the given scale."""
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")
    return rng.generator.laplace(0.0, scale, size=size)
