"""Result type shared by the mean estimators."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Method(str, enum.Enum):
    KNOWN_BF = "KnownBF"
    UNK_VAR = "UnkVar"
    LARGE_VAR = "LargeVar"
    TRIVIAL_FULL_RANGE = "TrivialFullRange"


@dataclass
class ConfidenceInterval:
    """A ``1 - beta`` confidence interval for the population mean.

    ``sigma_tilde_sq`` is the variance of ``mu_tilde``'s sampling distribution
    when the estimator has one (the Gaussian-noise estimators); ``details``
    carries per-method provenance such as phase sizes and intermediate
    thresholds.
    """

    lo: float
    hi: float
    confidence: float
    mu_tilde: float
    sigma_tilde_sq: float | None
    method: Method
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        out = {
            "lo": self.lo,
            "hi": self.hi,
            "confidence": self.confidence,
            "mu_tilde": self.mu_tilde,
            "sampling_var": self.sigma_tilde_sq,
            "method": self.method.value,
        }
        out.update(self.details)
        return out
