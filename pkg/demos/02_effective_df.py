"""Effective degrees of freedom: estimate, smoothing and a direct-sampling check."""

import numpy as np

from kselect.core import fit_series
from kselect.edf import df_curve, direct_sampling, reassignment_delta, stein_identity_check
from kselect.simulate import MixtureSpec, generate

# Where does a point switch cluster? 1-D: x=1 in a 2-point cluster at 0, other centroid at 4.
sol = reassignment_delta([1.0], 0, [0.0], 2, [4.0])
print("crossing shift", sol.delta)  # 4/3; its own centroid follows the point

# A step function jumps once; the covariance with its input is the density at the jump.
chk = stein_identity_check(0.0, 1.0, 1.0, 10**6, seed=0)
print(f"step covariance {chk.lhs:.4f} +- {chk.se:.4f}, density {chk.rhs:.4f}")

# Five Gaussian clusters in five dimensions.
data = generate(MixtureSpec(k=5, d=5, n=1000, seed=0))
series = fit_series(data.X, 1, 10, n_init=10, seed=0)
curve = df_curve(data.X, series)
print(" k    kd   excess     raw  smoothed")
for k, raw, ex, sm in zip(curve.ks, curve.raw_df, curve.excess_df, curve.smoothed_df):
    print(f"{k:2d} {k * 5:5d} {ex:8.2f} {raw:7.2f} {sm:9.2f}")

# Direct sampling around the true means: refit on fresh noise and measure Cov(fit, data).
mu = data.means[data.labels - 1]
oracle, averaged = direct_sampling(mu, 1.0, [1, 3, 5, 7], n_reps=20, n_init=5, seed=1, k_prime=11)
for k, o, a in zip([1, 3, 5, 7], oracle, averaged):
    print(f"k={k}: sampled df {o:6.2f}   averaged estimate {a:6.2f}   kd {5 * k}")
