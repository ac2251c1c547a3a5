"""
Private quantile search
=======================

The binary search asks a fresh batch of users, once per step, whether their
value lies below the current midpoint. Each answer goes through randomized
response, and the debiased fraction decides which half to keep.
"""

import io

import numpy as np

from ldp_meanest import QuantileQuery, RngStream, UserPool, bin_rr, std_normal_cdf
from ldp_meanest.quantile import binary_search_quantile, iterations_for, required_sample_size

###############################################################################
# A noiseless run first
# ---------------------
# Feeding the exact CDF in place of private estimates shows the bisection on
# its own. The target is the one-sd quantile of N(3, 1), which is 4.
p_star = std_normal_cdf(1.0)
query = QuantileQuery(p_star, -10.0, 20.0, lam=0.052, T=iterations_for(-10.0, 20.0, 0.05))
exact = binary_search_quantile(query, lambda j, t: std_normal_cdf(t - 3.0))
for step in exact.trace:
    print(step)

###############################################################################
# The private version
# -------------------
# The sample size grows like T / lambda^2, with the usual randomized-response
# factor ((e^eps + 1) / (e^eps - 1))^2.
N = required_sample_size(0.052, 0.1, 1.0, query.T)
print(f"T = {query.T}, N = {N:,} users, {N // query.T:,} per step")

stream = RngStream(7)
values = stream.substream(0).generator.normal(3.0, 1.0, size=N)
pool = UserPool(values)
res = bin_rr(pool, query, 1.0, stream.substream(1))
print(res.to_dict())

buf = io.StringIO()
res.write_trace(buf)
print(buf.getvalue())

# users after an early stop are never asked anything
print(f"consumed {int(pool.consumed.sum()):,} of {N:,} users")

###############################################################################
# How often does it work?
# -----------------------
# Success means the returned threshold has quantile mass within lambda of
# p*, or lies within tau of the true quantile.
hits = []
for t in range(40):
    s = RngStream(8, t)
    r = bin_rr(UserPool(s.substream(0).generator.normal(3.0, 1.0, size=N)), query, 1.0, s.substream(1))
    hits.append(abs(std_normal_cdf(r.threshold - 3.0) - p_star) <= 0.052 or abs(r.threshold - 4.0) <= 0.05)
print(f"success rate {np.mean(hits):.2f} over {len(hits)} runs")
