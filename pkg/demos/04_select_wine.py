"""All six selectors on the standardised Wine data."""

from sklearn.datasets import load_wine

from kselect.core import fit_series, standardize
from kselect.evaluate import adjusted_rand_index, ideal_selection, normalized_regret
from kselect.selection import SelectionConfig, gap_select, select_all

wine = load_wine()
X, truth = standardize(wine.data), wine.target + 1

series = fit_series(X, 1, 30, n_init=10, seed=0)
results, errors = select_all(X, series, SelectionConfig(seed=0))
k_id, ari_id = ideal_selection(series, truth)

print(f"{'method':<11} k_hat   ARI  regret   ms")
for r in results:
    ari = adjusted_rand_index(series[r.k_hat].assignments, truth)
    print(f"{r.method:<11} {r.k_hat:5d} {ari:5.2f} {normalized_regret(ari_id, ari):7.2f} {r.runtime_ms:5.0f}")
print(f"{'ideal':<11} {k_id:5d} {ari_id:5.2f}")

# The Gap statistic is sensitive to its reference box; the PCA-aligned box is less diffuse.
print("gap with PCA reference:", gap_select(X, series, B=50, seed=0, reference="pca").k_hat)

# The estimated df climbs well above kd, which is what holds BIC_edf at 3.
bic = next(r for r in results if r.method == "bic_edf")
print("smoothed df, k=1..8:", bic.aux["smoothed_df"][:8].round(1))
print("kd,          k=1..8:", [13 * k for k in range(1, 9)])
