"""Selector accuracy on simulated mixtures, one small scenario per scheme."""

from kselect.selection import SelectionConfig
from kselect.simulate import SCHEMES, MixtureSpec, run_scenario

config = SelectionConfig(methods=("bic_edf", "bic_naive", "fk", "silhouette"), seed=0)
print(f"{'scheme':<18}" + "".join(f"{m:>22}" for m in config.methods))
for scheme in SCHEMES:
    spec = MixtureSpec(scheme=scheme, k=4, d=3, n=400)
    summ = run_scenario(spec, reps=3, config=config, seed=0, k_max=12, n_init=5)
    cells = []
    for m in config.methods:
        k, a = summ.k_hat[m], summ.ari100[m]
        # median k (10th, 90th centile) and median 100 * ARI
        cells.append(f"{k[50]:g} ({k[10]:g},{k[90]:g}) {a[50]:5.1f}")
    print(f"{scheme:<18}" + "".join(f"{c:>22}" for c in cells))
