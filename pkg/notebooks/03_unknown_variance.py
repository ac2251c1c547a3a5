"""
Mean intervals when sigma is unknown
====================================

Two private quantile searches give a median estimate t_mu and a one-sd
estimate t_sigma. Their gap brackets sigma, which sets the clipping range for
a final noisy average. If the data may be far wider than the prior range
[-R, R], a detector first checks how much mass falls in [-2R, 2R].
"""

from ldp_meanest import (
    PrivacyParams,
    RngStream,
    UnknownVarConfig,
    UserPool,
    estimate_mean_auto,
    min_sample_size_unknown,
    unk_var,
)
from ldp_meanest.mean_unknown import detection_sample_size, large_var

privacy = PrivacyParams(1.0, 1e-9)
R = 100.0

###############################################################################
# Bounded variance
# ----------------
cfg = UnknownVarConfig(sigma_min=0.25, sigma_max=2 * R, beta=0.05, privacy=privacy, R=R)
n = min_sample_size_unknown(cfg)
print(f"sample bound: {n:,} users")

stream = RngStream(3)
pool = UserPool(stream.substream(0).generator.normal(10.0, 2.0, size=n))
ci = unk_var(pool, cfg, stream.substream(1))
print(f"interval [{ci.lo:.3f}, {ci.hi:.3f}] around {ci.mu_tilde:.3f}")
print(f"t_mu = {ci.details['t_mu_hat']:.3f}, t_sigma = {ci.details['t_sigma_hat']:.3f}, "
      f"sigma proxy = {ci.details['sigma_proxy']:.3f} (true sigma 2)")
print("users per phase:", ci.details["users_per_phase"])

###############################################################################
# Very large variance
# -------------------
# Once sigma > R, the tail masses P[X <= -R] and P[X <= R] pin down mu. The
# guard only trusts the interpolation when the two masses differ by 800 B.
# At sigma = 1.2 R that takes about 10^7 users. Below that it returns the
# whole prior range [-R, R].
for n_large in (100_000, 20_000_000):
    s = RngStream(4, n_large)
    pool = UserPool(s.substream(0).generator.normal(30.0, 1.2 * R, size=n_large))
    ci = large_var(pool, 5.0, R, 0.05, s.substream(1))
    print(f"n={n_large:>10,}: {ci.method.value:16s} [{ci.lo:8.2f}, {ci.hi:8.2f}]  guard fired: {ci.details['guard_fired']}")

###############################################################################
# Letting the detector choose
# ---------------------------
m = detection_sample_size(1.0, 0.05)
for sigma in (R / 4, 5 * R):
    s = RngStream(5, int(sigma))
    pool = UserPool(s.substream(0).generator.normal(0.0, sigma, size=m + n))
    ci = estimate_mean_auto(pool, 0.25, 0.05, privacy, R, s.substream(1))
    print(f"sigma={sigma:6.1f}: regime {ci.details['regime']:16s} fraction {ci.details['regime_fraction']:.3f} "
          f"-> {ci.method.value} [{ci.lo:.2f}, {ci.hi:.2f}]")
