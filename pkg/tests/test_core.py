import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kselect.core import (
    ConstantColumn, DegenerateData, KTooLarge, best_of_inits, fit_series, fitted_values,
    init_seeds, k_seed, lloyd_fit, standardize,
)
from oracles import best_partition_wss


def small_matrices(max_n=12, max_d=3):
    return st.integers(2, max_n).flatmap(
        lambda n: st.integers(1, max_d).flatmap(
            lambda d: arrays(np.float64, (n, d),
                             elements=st.floats(-50, 50, allow_nan=False, width=32))))


def assert_valid(X, fit):
    assert fit.assignments.dtype == np.intp
    assert fit.assignments.min() >= 0 and fit.assignments.max() < fit.k
    sizes = np.bincount(fit.assignments, minlength=fit.k)
    np.testing.assert_array_equal(sizes, fit.cluster_sizes)
    assert np.all(sizes >= 1)
    for c in range(fit.k):
        np.testing.assert_allclose(fit.centroids[c], X[fit.assignments == c].mean(axis=0),
                                   rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(fit.within_ss, ((X - fitted_values(fit)) ** 2).sum(),
                               rtol=1e-10, atol=1e-9)


# standardize

def test_standardize_divides_by_sd():
    out = standardize(np.array([[2.0], [4.0], [6.0]]))
    np.testing.assert_allclose(out[:, 0], [1.0, 2.0, 3.0])
    assert out.var(ddof=1) == pytest.approx(1.0)


def test_standardize_is_idempotent():
    X = standardize(np.random.default_rng(0).normal(size=(40, 3)))
    np.testing.assert_allclose(standardize(X), X, rtol=1e-13)


def test_standardize_two_scales():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 2))
    X = (X - X.mean(0)) / X.std(0, ddof=1) * np.array([2.0, 0.5])
    assert np.allclose(X.var(0, ddof=1), [4.0, 0.25])
    np.testing.assert_allclose(standardize(X).var(0, ddof=1), [1.0, 1.0])


def test_standardize_constant_column():
    X = np.array([[1.0, 3.0], [2.0, 3.0], [4.0, 3.0]])
    with pytest.raises(ConstantColumn) as info:
        standardize(X)
    assert info.value.column == 1
    np.testing.assert_array_equal(standardize(X, strict=False)[:, 1], X[:, 1])


# lloyd_fit / best_of_inits

def test_four_point_optimum(four_points):
    assert best_partition_wss(four_points, 2) == pytest.approx(1.0)
    for seed in range(10):
        fit = best_of_inits(four_points, 2, n_init=10, seed=seed)
        assert fit.within_ss == pytest.approx(1.0)
        got = sorted(map(tuple, fit.centroids))
        assert got == [(0.0, 0.5), (10.0, 0.5)]
        np.testing.assert_allclose(sorted(map(tuple, fitted_values(fit))),
                                   [(0, .5), (0, .5), (10, .5), (10, .5)])


def test_k_equals_one(four_points):
    fit = lloyd_fit(four_points, 1, seed=3)
    np.testing.assert_allclose(fit.centroids[0], four_points.mean(0))
    tss = ((four_points - four_points.mean(0)) ** 2).sum()
    assert fit.within_ss == pytest.approx(tss)
    assert np.all(fitted_values(fit) == fitted_values(fit)[0])


def test_k_equals_n(four_points):
    fit = lloyd_fit(four_points, 4, seed=0)
    assert fit.within_ss == 0.0
    np.testing.assert_array_equal(fitted_values(fit), four_points)


def test_k_too_large_and_degenerate(four_points):
    with pytest.raises(KTooLarge):
        lloyd_fit(four_points, 5)
    with pytest.raises(DegenerateData):
        lloyd_fit(np.ones((5, 2)), 2)


def test_single_init_matches_lloyd_with_subseed(four_points):
    X = np.random.default_rng(2).normal(size=(30, 2))
    a = best_of_inits(X, 3, n_init=1, seed=7)
    b = lloyd_fit(X, 3, seed=init_seeds(7, 1)[0])
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert a.within_ss == b.within_ss


def test_best_of_inits_beats_each_start():
    X = np.random.default_rng(3).normal(size=(60, 2))
    best = best_of_inits(X, 4, n_init=10, seed=1)
    for ss in init_seeds(1, 10):
        assert best.within_ss <= lloyd_fit(X, 4, seed=ss).within_ss


def test_deterministic():
    X = np.random.default_rng(4).normal(size=(50, 3))
    a, b = best_of_inits(X, 3, seed=5), best_of_inits(X, 3, seed=5)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    np.testing.assert_array_equal(a.assignments, b.assignments)


def test_seed_sequence_not_consumed():
    ss = np.random.SeedSequence(9)
    first = best_of_inits(np.arange(20.0)[:, None], 3, seed=ss)
    second = best_of_inits(np.arange(20.0)[:, None], 3, seed=ss)
    np.testing.assert_array_equal(first.assignments, second.assignments)


@settings(max_examples=60, deadline=None)
@given(X=small_matrices(), k=st.integers(1, 4), seed=st.integers(0, 2**16))
def test_lloyd_properties(X, k, seed):
    k = min(k, len(np.unique(X, axis=0)))
    fit = lloyd_fit(X, k, seed=seed)
    assert_valid(X, fit)
    trace = fit.objective_trace
    for before, after in zip(trace, trace[1:]):
        assert after <= before * (1 + 1e-12) + 1e-9
    if trace:
        assert fit.within_ss <= trace[-1] * (1 + 1e-12) + 1e-9
    if fit.converged and k > 1:
        # Converged fits assign each row to a nearest centroid.
        d2 = ((X[:, None, :] - fit.centroids[None]) ** 2).sum(-1)
        own = d2[np.arange(len(X)), fit.assignments]
        assert np.all(own <= d2.min(axis=1) + 1e-7 * (1 + d2.max()))


# fit_series

def test_fit_series_keys(four_points):
    s = fit_series(four_points, 1, 3, seed=0)
    assert sorted(s.fits) == [1, 2, 3, 4]
    assert s.ks == [1, 2, 3] and s.k_max_plus == 4
    assert all(f.n == 4 and f.d == 2 for f in s.fits.values())


def test_fit_series_total_ss(four_points):
    s = fit_series(four_points, 1, 2, seed=0)
    # Grand mean (5, 0.5): 4 * 25 + 4 * 0.25.
    assert s[1].within_ss == pytest.approx(101.0)
    assert s.within_ss()[1] == pytest.approx(1.0)


def test_fit_series_thread_independent():
    X = np.random.default_rng(6).normal(size=(80, 2))
    a = fit_series(X, 1, 6, n_init=3, seed=2, threads=1)
    b = fit_series(X, 1, 6, n_init=3, seed=2, threads=3)
    for k in a.fits:
        np.testing.assert_array_equal(a[k].assignments, b[k].assignments)
        assert a[k].within_ss == b[k].within_ss


def test_k_seed_depends_on_k_only():
    a, b = k_seed(3, 5), k_seed(3, 5)
    assert a.generate_state(2).tolist() == b.generate_state(2).tolist()
    assert k_seed(3, 6).generate_state(2).tolist() != a.generate_state(2).tolist()


def test_fit_series_bad_range(four_points):
    with pytest.raises(ValueError):
        fit_series(four_points, 3, 2)
    with pytest.raises(KTooLarge):
        fit_series(four_points, 1, 4)
