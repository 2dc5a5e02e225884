import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kselect.core import FitSeries, KMeansFit, fit_series, standardize
from kselect.selection import (
    METHODS, AllDegenerate, SelectionConfig, bic_curve, bic_edf_select, bic_naive_select,
    first_local_minimum, fk_select, fk_values, gap_rule, gap_select, jump_select,
    jump_values, mean_silhouette, select_all, silhouette_select,
)


def fake_series(wss, n=100, d=2, k_min=1):
    """FitSeries carrying only the within-cluster sums (plus the k_max+1 entry)."""
    fits = {}
    for k, w in enumerate(list(wss) + [wss[-1] * 0.9], start=k_min):
        fits[k] = KMeansFit(k=k, centroids=np.zeros((k, d)),
                            assignments=np.arange(n) % k, cluster_sizes=np.bincount(np.arange(n) % k),
                            within_ss=float(w), converged=True)
    return FitSeries(fits=fits, k_min=k_min, k_max=k_min + len(wss) - 1)


# first local minimum

@pytest.mark.parametrize("scores, expected", [
    ([5, 3, 4, 2, 6], 2),
    ([5, 4, 3, 2, 1], 5),
    ([5, 3, 3, 4], 2),
    ([1, 2, 3], 1),
])
def test_first_local_minimum(scores, expected):
    assert first_local_minimum(scores, range(1, len(scores) + 1)) == expected


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=20))
def test_first_local_minimum_endpoint_only_without_dip(scores):
    ks = list(range(1, len(scores) + 1))
    k = first_local_minimum(scores, ks)
    interior = [m for m in range(1, len(scores) - 1)
                if scores[m] < scores[m - 1] and scores[m] <= scores[m + 1]]
    if interior:
        assert k == ks[interior[0]]
    else:
        assert k in (ks[0], ks[-1])


# BIC

def test_bic_arithmetic():
    X = np.zeros((100, 2))
    X[0, 0] = 1.0  # non-degenerate total SS
    s = fake_series([50.0], n=100, d=2)
    bic = bic_curve(X, s, [10.0]).bic[0]
    expect = 200 * math.log(50) + math.log(200) * 10
    assert bic == pytest.approx(expect) and bic == pytest.approx(835.38, abs=0.01)


def test_bic_naive_constant_rss_picks_kmin():
    X = np.random.default_rng(0).normal(size=(100, 2))
    s = fake_series([40.0] * 6, n=100, d=2)
    res = bic_naive_select(X, s)
    assert np.all(np.diff(res.scores) > 0) and res.k_hat == 1


def test_bic_all_degenerate():
    X = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(AllDegenerate):
        bic_curve(X, fake_series([0.0, 0.0], n=10), [2.0, 4.0])


def test_bic_edf_on_blobs(blobs):
    s = fit_series(blobs.X, 1, 10, n_init=5, seed=0)
    res = bic_edf_select(blobs.X, s)
    assert res.k_hat == 5
    assert set(res.aux) >= {"raw_df", "excess_df", "smoothed_df", "df"}
    np.testing.assert_array_equal(res.aux["df"], res.aux["smoothed_df"])
    raw = bic_edf_select(blobs.X, s, use_smoothed=False)
    np.testing.assert_array_equal(raw.aux["df"], raw.aux["raw_df"])


# Gap

def test_gap_rule_example():
    assert gap_rule([0.10, 0.50, 0.45], [0.01] * 3, [1, 2, 3]) == 2


def test_gap_rule_never_fires():
    assert gap_rule([0.1, 0.2, 0.3], 0.0, [1, 2, 3]) == 3


def test_gap_uniform_box_mostly_one():
    hits = 0
    for s in range(10):
        X = np.random.default_rng(100 + s).uniform(size=(500, 2))
        series = fit_series(X, 1, 6, n_init=3, seed=s)
        hits += gap_select(X, series, B=20, seed=s).k_hat == 1
    assert hits >= 8


@pytest.mark.parametrize("reference", ["box", "pca"])
def test_gap_row_permutation_invariant(blobs, reference):
    # Same fits on permuted rows: the reference draws must not change.
    X = blobs.X[:300]
    perm = np.random.default_rng(0).permutation(len(X))
    series = fit_series(X, 1, 7, n_init=5, seed=0)
    a = gap_select(X, series, B=10, seed=3, reference=reference)
    b = gap_select(X[perm], series, B=10, seed=3, reference=reference)
    assert a.k_hat == b.k_hat
    np.testing.assert_allclose(a.scores, b.scores, rtol=1e-8)


def test_gap_relabel_invariant(blobs):
    X = blobs.X[:200]
    series = fit_series(X, 1, 5, n_init=3, seed=0)
    for fit in series.fits.values():
        fit.assignments = (fit.assignments + 1) % fit.k
    b = gap_select(X, series, B=10, seed=3)
    a = gap_select(X, fit_series(X, 1, 5, n_init=3, seed=0), B=10, seed=3)
    np.testing.assert_array_equal(a.scores, b.scores)


def test_gap_bad_reference(blobs):
    with pytest.raises(ValueError):
        gap_select(blobs.X[:50], fit_series(blobs.X[:50], 1, 2, n_init=1), B=5, reference="x")


# fK

def test_fk_example():
    f = fk_values([100.0, 50.0], d=2)
    assert f[0] == 1.0 and f[1] == pytest.approx(0.8)


def test_fk_alpha_recursion():
    d = 4
    a2 = 1 - 3 / (4 * d)
    a3 = a2 + (1 - a2) / 6
    S = [100.0, 100.0 * a2, 100.0 * a2 * a3]
    np.testing.assert_allclose(fk_values(S, d), 1.0)
    X = np.random.default_rng(0).normal(size=(50, d))
    assert fk_select(X, fake_series(S, n=50, d=d)).k_hat == 1


def test_fk_needs_two_dims():
    with pytest.raises(ValueError):
        fk_values([1.0, 0.5], d=1)


# silhouette

def test_silhouette_toy():
    X = np.array([[0.0], [0.1], [10.0], [10.1]])
    # a = 0.1 for every point; b = 10.05, 9.95, 9.95, 10.05.
    s = [(10.05 - 0.1) / 10.05, (9.95 - 0.1) / 9.95, (9.95 - 0.1) / 9.95, (10.05 - 0.1) / 10.05]
    assert s[0] == pytest.approx(0.9900, abs=1e-4)
    got = mean_silhouette(X, [1, 1, 2, 2])
    assert got == pytest.approx(np.mean(s), abs=1e-12)
    assert got == pytest.approx(0.9900, abs=1e-4)


def test_silhouette_perfect_groups():
    X = np.array([[0.0, 0.0]] * 3 + [[5.0, 1.0]] * 4)
    assert mean_silhouette(X, [0] * 3 + [1] * 4) == 1.0


def test_silhouette_singletons_score_zero():
    X = np.array([[0.0], [0.2], [5.0]])
    # Point 3 is a singleton; the pair scores (5.0 - 0.2) / 5.0 and (4.8 - 0.2) / 4.8.
    expect = ((5.0 - 0.2) / 5.0 + (4.8 - 0.2) / 4.8) / 3
    assert mean_silhouette(X, [0, 0, 1]) == pytest.approx(expect)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(2, 5), n=st.integers(6, 60))
def test_silhouette_matches_sklearn(seed, k, n):
    metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    labels = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
    got = mean_silhouette(X, labels, block=7)
    assert -1 <= got <= 1
    assert got == pytest.approx(metrics.silhouette_score(X, labels), abs=1e-10)


def test_silhouette_select_range(four_points):
    s = fit_series(four_points, 1, 3, seed=0)
    res = silhouette_select(four_points, s)
    assert res.ks == [2, 3] and res.k_hat == 2


# Jump

def test_jump_micro_example():
    T, J = jump_values([10.0, 2.0, 1.9], power=1.0)
    np.testing.assert_allclose(T, [0.1, 0.5, 1 / 1.9])
    np.testing.assert_allclose(J, [0.1, 0.4, 1 / 1.9 - 0.5])
    X = np.random.default_rng(0).normal(size=(50, 2))
    series = fake_series(np.array([10.0, 2.0, 1.9]) * X.size, n=50, d=2)
    assert jump_select(X, series).k_hat == 2


def test_jump_geometric_peaks_at_end():
    X = np.random.default_rng(0).normal(size=(50, 2))
    D = 5.0 * 0.5 ** np.arange(1, 9)
    series = fake_series(D * X.size, n=50, d=2)
    assert jump_select(X, series).k_hat == 8


@given(c=st.floats(1e-3, 1e3))
def test_jump_scale_invariant(c):
    X = np.random.default_rng(0).normal(size=(50, 2))
    D = np.array([10.0, 4.0, 3.0, 2.9, 1.0, 0.95]) * X.size
    assert jump_select(X, fake_series(D)).k_hat == jump_select(X, fake_series(c * D)).k_hat


# orchestration

def test_select_all_independence(blobs):
    X = blobs.X[:300]
    s = fit_series(X, 1, 8, n_init=3, seed=0)
    full, err = select_all(X, s, SelectionConfig(gap_B=10))
    assert not err and [r.method for r in full] == list(METHODS)
    part, _ = select_all(X, s, SelectionConfig(gap_B=10, methods=tuple(m for m in METHODS if m != "gap")))
    assert len(part) == 5
    by = {r.method: r for r in full}
    for r in part:
        assert r.k_hat == by[r.method].k_hat
        np.testing.assert_array_equal(r.scores, by[r.method].scores)


def test_select_all_collects_errors():
    X = np.random.default_rng(0).normal(size=(30, 1))
    s = fit_series(X, 1, 4, n_init=2, seed=0)
    results, errors = select_all(X, s, SelectionConfig(gap_B=5))
    assert "fk" in errors and len(results) == 5


def test_select_all_unknown_method(four_points):
    with pytest.raises(ValueError):
        select_all(four_points, fit_series(four_points, 1, 2), SelectionConfig(methods=("nope",)))


@pytest.mark.slow
def test_wine_selectors(wine):
    X = standardize(wine[0])
    s = fit_series(X, 1, 30, n_init=10, seed=0)
    res, _ = select_all(X, s, SelectionConfig(methods=("bic_edf", "fk", "silhouette")))
    assert {r.method: r.k_hat for r in res} == {"bic_edf": 3, "fk": 2, "silhouette": 3}
    assert gap_select(X, s, B=50, seed=0, reference="pca").k_hat == 3
