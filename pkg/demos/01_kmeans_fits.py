"""Lloyd fits, random restarts and a fit series."""

import numpy as np

from kselect.core import best_of_inits, fit_series, fitted_values, lloyd_fit, standardize

# Four points in two tight pairs. The best 2-cluster split is obvious.
X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
fit = best_of_inits(X, 2, n_init=10, seed=0)
print("centroids\n", fit.centroids)
print("within SS", fit.within_ss, "sizes", fit.cluster_sizes)
print("fitted values\n", fitted_values(fit))

# One Lloyd run keeps its objective after every update; it never goes up.
rng = np.random.default_rng(1)
Y = np.vstack([rng.normal(c, 1.0, size=(100, 2)) for c in (0, 5, 10)])
run = lloyd_fit(Y, 3, seed=4)
print("objective trace", np.round(run.objective_trace, 2), "converged", run.converged)

# Restarts help on harder problems: compare single starts with the best of 10.
singles = [lloyd_fit(Y, 6, seed=s).within_ss for s in range(10)]
print("single starts  min %.2f  max %.2f" % (min(singles), max(singles)))
print("best of 10     %.2f" % best_of_inits(Y, 6, n_init=10, seed=0).within_ss)

# A fit series holds k = k_min..k_max plus the k_max + 1 fit used for plug-in values.
Z = standardize(Y)
series = fit_series(Z, 1, 8, n_init=10, seed=0)
for k in series.ks:
    print(f"k={k:2d}  W={series[k].within_ss:8.2f}")
print("extra fit at k =", series.k_max_plus)
