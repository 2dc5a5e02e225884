"""How the df estimate for a fixed k depends on the plug-in model size k'.

For k' < k the plug-in fit is too coarse and the estimate is large. It
settles once k' exceeds k, and at k' = k (the model's own fit) it dips.
"""

import numpy as np
from sklearn.datasets import load_wine

from kselect.core import fit_series, standardize
from kselect.edf import df_vs_kprime_curve

X = standardize(load_wine().data)
series = fit_series(X, 1, 29, n_init=10, seed=0)  # covers every k' in 1..30

for k in (5, 10, 15):
    curve = dict(df_vs_kprime_curve(X, k, range(1, 31), seed=0, series=series))
    later = np.mean([curve[kp] for kp in range(k + 2, k + 6)])
    print(f"k={k:2d}  df at k'=k: {curve[k]:7.1f}   mean over k'={k + 2}..{k + 5}: {later:7.1f}")
    print("      ", " ".join(f"{curve[kp]:.0f}" for kp in range(1, 31)))
