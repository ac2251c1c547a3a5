"""
Power and p-values of a private Z-test
======================================

Every user holds one draw from N(mu', 1) and the analyst wants to test
H0: mu = 0. The test is built on the known-variance interval. A bit-flipping
histogram finds the bin holding the mean, then every remaining user sends a
clipped value with Gaussian noise. The noisy average is approximately
N(mu', (sigma^2 + noise variance) / n2), which gives a z-score.

Run with ``python3 notebooks/01_ztest_power.py``; it takes a minute or two.
"""

from ldp_meanest.harness import Estimator, ExperimentConfig, GaussianSpec, run_experiment, summaries_to_csv

# Setup: R = 200, beta = 0.01, delta = 1e-9, 50 trials per point to keep it quick.
base = dict(delta=1e-9, beta=0.01, R=200.0, mu0=0.0, significance=0.05,
            enforce_sample_bound=False, phase1_cap=0.25)

###############################################################################
# Average p-value against the true mean, n = 200,000
# ---------------------------------------------------
# The privacy cost shows up as a much wider sampling distribution than the
# non-private sigma / sqrt(n). Smaller eps means bigger noise, so p-values
# stay high for longer.
cfg = ExperimentConfig(Estimator.ZTEST, GaussianSpec(0.0, 1.0), 200_000, trials=50, seed=1,
                       params=base, sweep=[("epsilon", [0.5, 1.5]), ("mu", [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])])
print(summaries_to_csv(run_experiment(cfg), Estimator.ZTEST))

###############################################################################
# Power against n at mu' = 3
# --------------------------
# At eps = 1.5 power reaches 0.9 at around 10^4 users. At eps = 0.5 the same
# n is far from enough: the noise variance grows like 1 / eps^2, and the
# histogram phase gets noisier too.
#
# The smallest pools at eps = 0.5 reject more often than n = 10^4. That is
# not power. The histogram phase picks the wrong bin, the clipping range
# misses the data, and the test rejects for the wrong reason.
cfg = ExperimentConfig(Estimator.ZTEST, GaussianSpec(3.0, 1.0), 10_000, trials=50, seed=2,
                       params=base, sweep=[("epsilon", [0.5, 1.5]), ("n", [2_000, 5_000, 10_000, 50_000, 100_000])])
print(summaries_to_csv(run_experiment(cfg), Estimator.ZTEST))

###############################################################################
# Size under the null
# -------------------
# With mu' = mu0 the rejection rate should stay near the 5% significance
# level. The interval can fail with probability beta, which may add up to
# another percent.
cfg = ExperimentConfig(Estimator.ZTEST, GaussianSpec(0.0, 1.0), 200_000, trials=200, seed=3,
                       params=dict(base, epsilon=1.5, enforce_sample_bound=True, phase1_cap=None))
s = run_experiment(cfg)[0]
print(f"null rejection rate {s.power:.3f}, 95% CI [{s.power_ci[0]:.3f}, {s.power_ci[1]:.3f}]")
