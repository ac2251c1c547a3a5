"""Locally private quantile estimation by binary search over randomized response."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import IO, Callable

from .errors import ConfigurationError, DomainError, PoolExhaustedError
from .mechanisms import debias_coefficient, rr_estimate_fraction
from .normal_math import RngStream
from .pool import UserPool


class Termination(str, enum.Enum):
    ESTIMATE_WITHIN_LAMBDA = "EstimateWithinLambda"
    ITERATION_BUDGET_EXHAUSTED = "IterationBudgetExhausted"


@dataclass(frozen=True)
class QuantileQuery:
    """Target quantile ``p_star`` searched for inside ``[q_min, q_max]``.

    ``lam`` is the quantile-mass tolerance (the search halts once an estimate is
    within ``lam / 2`` of ``p_star``) and ``T`` caps the number of halvings.
    """

    p_star: float
    q_min: float
    q_max: float
    lam: float
    T: int

    def __post_init__(self):
        if not 0.0 < self.p_star < 1.0:
            raise DomainError(f"p_star must lie in (0, 1), got {self.p_star}")
        if not self.q_min < self.q_max:
            raise ConfigurationError(f"need q_min < q_max, got [{self.q_min}, {self.q_max}]")
        if not 0.0 < self.lam < 0.5:
            raise DomainError(f"lambda must lie in (0, 1/2), got {self.lam}")
        if int(self.T) != self.T or self.T < 1:
            raise ConfigurationError(f"T must be a positive integer, got {self.T}")


@dataclass
class QuantileResult:
    threshold: float
    iterations_used: int
    terminated_by: Termination
    bracket: tuple[float, float]
    batch_size: int = 0
    trace: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "iterations_used": self.iterations_used,
            "terminated_by": self.terminated_by.value,
            "bracket": list(self.bracket),
            "batch_size": self.batch_size,
        }

    def write_trace(self, fp: IO[str]):
        for rec in self.trace:
            fp.write(json.dumps(rec) + "\n")


def iterations_for(q_min: float, q_max: float, tau: float) -> int:
    """ceil(log2((q_max - q_min) / tau)), never less than one probe."""
    if not q_max > q_min:
        raise ConfigurationError("need q_max > q_min")
    if not tau > 0:
        raise DomainError("tau must be positive")
    width = q_max - q_min
    if tau >= width:
        return 1
    T = math.ceil(math.log2(width / tau))
    # guard against log2 rounding just above an exact power of two
    while T > 1 and width / 2 ** (T - 1) <= tau:
        T -= 1
    return T


def required_sample_size(lam: float, beta: float, epsilon: float, T: int) -> int:
    """Total users for a (tau, lam, beta)-approximate search with ``T`` iterations."""
    if T < 1:
        raise ConfigurationError("T must be at least 1")
    if not 0.0 < lam < 0.5 or not 0.0 < beta < 0.5:
        raise DomainError("lambda and beta must lie in (0, 1/2)")
    coef = debias_coefficient(epsilon)
    return math.ceil(8.0 * T / lam**2 * coef**2 * math.log(4.0 * T / beta))


def binary_search_quantile(
    query: QuantileQuery, estimate: Callable[[int, float], float]
) -> QuantileResult:
    """Bisection driven by ``estimate(j, t) -> P[X < t]`` estimates.

    ``estimate`` is called once per iteration with the 1-based iteration index
    and the probe threshold. Passing an exact CDF gives a noiseless run.
    """
    s1, s2 = float(query.q_min), float(query.q_max)
    half = query.lam / 2.0
    trace = []
    t = (s1 + s2) / 2.0
    for j in range(1, query.T + 1):
        t = (s1 + s2) / 2.0
        z = float(estimate(j, t))
        if z > query.p_star + half:
            branch = "left"
            s2 = t
        elif z < query.p_star - half:
            branch = "right"
            s1 = t
        else:
            branch = "break"
        trace.append({"j": j, "t_j": t, "z_j": z, "branch": branch})
        if branch == "break":
            return QuantileResult(t, j, Termination.ESTIMATE_WITHIN_LAMBDA, (s1, s2), trace=trace)
    return QuantileResult(t, query.T, Termination.ITERATION_BUDGET_EXHAUSTED, (s1, s2), trace=trace)


def bin_rr(
    pool: UserPool,
    query: QuantileQuery,
    epsilon: float,
    rng: RngStream,
    n_users: int | None = None,
) -> QuantileResult:
    """Private p*-quantile search over the next ``n_users`` users of ``pool``.

    Each iteration queries a fresh batch of ``n_users // T`` users with
    randomized response on the indicator ``x < t``. Batches not reached
    because of an early break stay unconsumed.
    """
    N = pool.remaining if n_users is None else int(n_users)
    if N > pool.remaining:
        raise PoolExhaustedError(f"binary search needs {N} users, pool has {pool.remaining}")
    n = N // query.T
    if n < 1:
        raise PoolExhaustedError(f"{N} users cannot fill {query.T} non-empty batches")

    def estimate(j: int, t: float) -> float:
        try:
            return rr_estimate_fraction(
                pool, n, lambda x: x < t, epsilon, rng.substream(j), mechanism="binary_search_rr"
            )
        except PoolExhaustedError as exc:
            raise PoolExhaustedError(f"pool exhausted at iteration {j}: {exc}") from exc

    result = binary_search_quantile(query, estimate)
    result.batch_size = n
    return result
