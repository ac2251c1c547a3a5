import io
import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ldp_meanest.errors import ConfigurationError, DomainError, PoolExhaustedError
from ldp_meanest.mechanisms import rr_sample_size
from ldp_meanest.normal_math import RngStream, std_normal_cdf, std_normal_inv_cdf
from ldp_meanest.pool import UserPool
from ldp_meanest.quantile import (
    QuantileQuery,
    Termination,
    bin_rr,
    binary_search_quantile,
    iterations_for,
    required_sample_size,
)


def coef(eps):
    return (math.exp(eps) + 1) / (math.exp(eps) - 1)


def test_query_validation():
    with pytest.raises(ConfigurationError):
        QuantileQuery(0.5, 1.0, 1.0, 0.05, 3)
    with pytest.raises(DomainError):
        QuantileQuery(1.0, 0.0, 1.0, 0.05, 3)
    with pytest.raises(ConfigurationError):
        QuantileQuery(0.5, 0.0, 1.0, 0.05, 0)


@pytest.mark.parametrize("args,expected", [
    ((-1, 1, 0.5), 2),
    ((0, 1024, 1), 10),
    ((-200, 200, 0.125), 12),
    ((0, 1, 5.0), 1),
    ((0, 1, 1.0), 1),
])
def test_iterations_for(args, expected):
    assert iterations_for(*args) == expected


@settings(max_examples=300, deadline=None)
@given(st.floats(0.01, 1e4), st.floats(1e-4, 1e4))
def test_iterations_for_is_smallest_sufficient(width, tau):
    assume(tau < width)
    T = iterations_for(0.0, width, tau)
    assert width / 2**T <= tau * (1 + 1e-12)
    if T > 1:
        assert width / 2 ** (T - 1) > tau


def test_required_sample_size():
    T = math.ceil(math.log2(8 * 200 / 0.5))
    assert required_sample_size(0.098, 0.05, 1.0, T) == math.ceil(
        8 * T / 0.098**2 * coef(1.0) ** 2 * math.log(4 * T / 0.05)
    )
    # per-iteration share is the fraction-estimator size at lam/2 and beta/T
    T, lam, beta = 7, 0.1, 0.05
    share = 8 / lam**2 * coef(1.0) ** 2 * math.log(4 * T / beta)
    assert share == pytest.approx(2 / (lam / 2) ** 2 * coef(1.0) ** 2 * math.log(4 / (beta / T)))
    assert abs(rr_sample_size(lam / 2, beta / T, 1.0) - share) <= 1
    assert abs(required_sample_size(0.05, 0.05, 1.0, 5) - 4 * required_sample_size(0.1, 0.05, 1.0, 5)) <= 4
    with pytest.raises(ConfigurationError):
        required_sample_size(0.1, 0.05, 1.0, 0)


def exact_cdf(mu=0.0, sigma=1.0):
    return lambda j, t: std_normal_cdf((t - mu) / sigma)


def test_oracle_bisection_median():
    q = QuantileQuery(0.5, -8.0, 8.0, 0.05, 30)
    res = binary_search_quantile(q, exact_cdf())
    assert abs(std_normal_cdf(res.threshold) - 0.5) <= 0.05
    assert res.threshold == 0.0
    assert res.terminated_by is Termination.ESTIMATE_WITHIN_LAMBDA
    assert res.iterations_used == 1


def test_oracle_bisection_budget_exhausted_width():
    # a tiny lambda never triggers the break, so the bracket halves T times
    q = QuantileQuery(0.8413, -10.0, 20.0, 1e-12, 12)
    res = binary_search_quantile(q, exact_cdf(3.0))
    assert res.terminated_by is Termination.ITERATION_BUDGET_EXHAUSTED
    s1, s2 = res.bracket
    assert s2 - s1 == pytest.approx(30.0 / 2**12)
    t_star = 3.0 + std_normal_inv_cdf(0.8413)
    assert s1 <= t_star <= s2


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.02, 0.98),
    st.floats(-5, 5),
    st.floats(0.2, 5),
    st.floats(0.001, 0.2),
    st.integers(1, 25),
)
def test_oracle_invariant_bracket_holds_quantile(p_star, mu, sigma, lam, T):
    t_star = mu + sigma * std_normal_inv_cdf(p_star)
    lo, hi = t_star - 7.3 * sigma, t_star + 11.1 * sigma
    q = QuantileQuery(p_star, lo, hi, lam, T)
    res = binary_search_quantile(q, exact_cdf(mu, sigma))
    for step in res.trace:
        assert step["branch"] in ("left", "right", "break")
    s1, s2 = res.bracket
    assert s1 <= t_star <= s2
    assert q.q_min <= res.threshold <= q.q_max
    if res.terminated_by is Termination.ITERATION_BUDGET_EXHAUSTED:
        assert s2 - s1 == pytest.approx((hi - lo) / 2**res.iterations_used)
    else:
        assert abs(std_normal_cdf((res.threshold - mu) / sigma) - p_star) <= lam / 2


def test_oracle_quantile_at_bracket_edge():
    # true quantile equals q_min: accurate estimates keep pushing left, bracket keeps q_min
    q = QuantileQuery(0.5, 0.0, 16.0, 0.01, 10)
    res = binary_search_quantile(q, exact_cdf(0.0, 1.0))
    assert res.bracket[0] == 0.0
    assert res.bracket[0] <= 0.0 <= res.bracket[1]


@pytest.mark.parametrize("z,branch", [(0.525, "break"), (0.475, "break"), (0.5250001, "left"), (0.4749999, "right")])
def test_break_boundary_inclusive(z, branch):
    q = QuantileQuery(0.5, 0.0, 1.0, 0.05, 1)
    res = binary_search_quantile(q, lambda j, t: z)
    assert res.trace[0]["branch"] == branch


def test_bin_rr_batches_and_audit():
    values = RngStream(1).generator.normal(size=10_007)
    pool = UserPool(values)
    q = QuantileQuery(0.5, -4.0, 4.0, 1e-9, 5)
    res = bin_rr(pool, q, 1.0, RngStream(2))
    assert res.batch_size == 10_007 // 5
    used = res.iterations_used * res.batch_size
    assert pool.consumed.sum() == used
    assert pool.consumed[:used].all() and not pool.consumed[used:].any()
    assert pool.audit.user_counts(10_007).max() == 1
    starts = [e.start for e in pool.audit.entries]
    assert starts == sorted(starts)


def test_bin_rr_early_break_leaves_users():
    # half the users at -1, half at 1: the first probe t = 0 sees mass 1/2 and breaks
    pool = UserPool(RngStream(6).generator.permutation(np.repeat([-1.0, 1.0], 500)))
    q = QuantileQuery(0.5, -4.0, 4.0, 0.4, 10)
    res = bin_rr(pool, q, 30.0, RngStream(3))
    assert res.terminated_by is Termination.ESTIMATE_WITHIN_LAMBDA
    assert res.iterations_used == 1
    assert pool.consumed.sum() == 100
    assert pool.remaining == 900


def test_bin_rr_exhaustion_names_iteration():
    pool = UserPool(np.zeros(10))
    q = QuantileQuery(0.5, -1.0, 1.0, 0.01, 20)
    with pytest.raises(PoolExhaustedError):
        bin_rr(pool, q, 1.0, RngStream(0))
    # another consumer drains the shared pool while the search is running
    pool = UserPool(np.zeros(100))
    q = QuantileQuery(0.5, 1.0, 2.0, 0.001, 4)
    real_take = pool.take

    def greedy_take(k, *args, **kwargs):
        out = real_take(k, *args, **kwargs)
        real_take(min(15, pool.remaining), "other", 1.0)
        return out

    pool.take = greedy_take
    with pytest.raises(PoolExhaustedError, match="iteration 4"):
        bin_rr(pool, q, 30.0, RngStream(0), n_users=80)


def test_bin_rr_reproducible_and_trace():
    values = RngStream(4).generator.normal(size=5000)
    q = QuantileQuery(0.3, -5.0, 5.0, 0.05, 8)
    a = bin_rr(UserPool(values), q, 1.0, RngStream(5))
    b = bin_rr(UserPool(values), q, 1.0, RngStream(5))
    assert a.to_dict() == b.to_dict()
    buf = io.StringIO()
    a.write_trace(buf)
    rows = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert [r["j"] for r in rows] == list(range(1, a.iterations_used + 1))
    assert set(rows[0]) == {"j", "t_j", "z_j", "branch"}
