"""k-means fitting with Lloyd iterations, random restarts and standardisation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np


class ConstantColumn(ValueError):
    def __init__(self, column: int):
        super().__init__(f"column {column} has zero variance")
        self.column = column


class KTooLarge(ValueError):
    pass


class DegenerateData(ValueError):
    pass


def as_data_matrix(X) -> np.ndarray:
    """Validate ``X`` as a finite 2-D float array with at least one row and column."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"expected an n x d matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains NaN or infinite entries")
    return X


def standardize(X, strict: bool = True) -> np.ndarray:
    """Scale every column to unit sample variance (denominator n - 1).

    Columns are not centred. With ``strict=False`` constant columns are
    passed through unchanged instead of raising :class:`ConstantColumn`.
    """
    X = as_data_matrix(X)
    if X.shape[0] < 2:
        raise ValueError("need at least two rows to standardise")
    sd = X.std(axis=0, ddof=1)
    zero = sd <= 0
    if np.any(zero):
        if strict:
            raise ConstantColumn(int(np.flatnonzero(zero)[0]))
        sd = np.where(zero, 1.0, sd)
    return X / sd


@dataclass
class KMeansFit:
    """A k-means solution. ``assignments`` are 0-based cluster indices."""

    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    cluster_sizes: np.ndarray
    within_ss: float
    converged: bool
    n_iter: int = 0
    objective_trace: list[float] = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return len(self.assignments)

    @property
    def d(self) -> int:
        return self.centroids.shape[1]


def fitted_values(fit: KMeansFit) -> np.ndarray:
    """Matrix whose i-th row is the centroid assigned to row i."""
    return fit.centroids[fit.assignments]


def _sq_dists(X, C, x_sq=None):
    if x_sq is None:
        x_sq = np.einsum("ij,ij->i", X, X)
    D = x_sq[:, None] - 2.0 * X @ C.T + np.einsum("ij,ij->i", C, C)[None, :]
    np.maximum(D, 0.0, out=D)
    return D


def _update_centroids(X, labels, k):
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    return sums, counts


def _repair_empty(X, labels, centroids, counts):
    # Move the point farthest from its centroid into each empty cluster.
    k = len(counts)
    for empty in np.flatnonzero(counts == 0):
        resid = np.einsum("ij,ij->i", X - centroids[labels], X - centroids[labels])
        resid[counts[labels] <= 1] = -1.0
        i = int(np.argmax(resid))
        old = labels[i]
        labels[i] = empty
        counts[old] -= 1
        counts[empty] += 1
        members = labels == old
        centroids[old] = X[members].mean(axis=0)
        centroids[empty] = X[i]
    assert np.all(np.bincount(labels, minlength=k) >= 1)
    return labels, centroids, counts


def lloyd_fit(X, k: int, seed=None, max_iter: int = 100, tol: float = 1e-10) -> KMeansFit:
    """Run Lloyd's algorithm from a Forgy start (k distinct data rows).

    Iteration stops when the assignment is unchanged, when the relative
    decrease in the objective drops below ``tol``, or after ``max_iter``
    assign/update passes. Ties in the nearest-centroid step go to the
    lowest cluster index. Every assignment is to a nearest centroid when
    the run stops on an unchanged assignment.
    """
    X = as_data_matrix(X)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise KTooLarge(f"k={k} exceeds n={n}")
    if max_iter < 1 or tol < 0:
        raise ValueError("max_iter must be >= 1 and tol >= 0")

    rng = np.random.default_rng(seed)
    if k == 1:
        c = X.mean(axis=0, keepdims=True)
        labels = np.zeros(n, dtype=np.intp)
        return _finalize(X, c, labels, True, 1, [])

    uniq = np.unique(X, axis=0)
    if len(uniq) < k:
        raise DegenerateData(f"only {len(uniq)} distinct rows for k={k}")
    if len(uniq) == n:
        centroids = X[rng.choice(n, size=k, replace=False)].copy()
    else:
        centroids = uniq[rng.choice(len(uniq), size=k, replace=False)].copy()

    x_sq = np.einsum("ij,ij->i", X, X)
    labels = np.argmin(_sq_dists(X, centroids, x_sq), axis=1)
    trace = []
    converged = False
    obj_prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        sums, counts = _update_centroids(X, labels, k)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not np.all(nonempty):
            labels, centroids, counts = _repair_empty(X, labels, centroids, counts)
        diff = X - centroids[labels]
        obj = float(np.einsum("ij,ij->", diff, diff))
        trace.append(obj)

        new_labels = np.argmin(_sq_dists(X, centroids, x_sq), axis=1)
        if np.array_equal(new_labels, labels):
            converged = True
            break
        if np.isfinite(obj_prev) and obj_prev - obj <= tol * max(obj_prev, 1e-300):
            # Objective stalled; keep the labels that match the centroids.
            converged = True
            break
        labels = new_labels
        obj_prev = obj

    return _finalize(X, centroids, labels, converged, it, trace)


def _finalize(X, centroids, labels, converged, n_iter, trace):
    k = centroids.shape[0]
    sums, counts = _update_centroids(X, labels, k)
    # Recompute centroids as exact member means so the fit is self-consistent.
    centroids = sums / counts[:, None]
    diff = X - centroids[labels]
    wss = float(np.einsum("ij,ij->", diff, diff))
    return KMeansFit(
        k=k,
        centroids=centroids,
        assignments=labels.astype(np.intp),
        cluster_sizes=counts.astype(np.intp),
        within_ss=wss,
        converged=converged,
        n_iter=n_iter,
        objective_trace=trace,
    )


def _seed_sequence(seed) -> np.random.SeedSequence:
    # Fresh copy: spawn() mutates the sequence it is called on.
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=seed.spawn_key)
    return np.random.SeedSequence(seed)


def init_seeds(seed, n_init: int) -> list[np.random.SeedSequence]:
    """Sub-seeds used by :func:`best_of_inits`, one per restart."""
    return _seed_sequence(seed).spawn(n_init)


def best_of_inits(X, k: int, n_init: int = 10, seed=None, max_iter: int = 100,
                  tol: float = 1e-10) -> KMeansFit:
    """Best of ``n_init`` Lloyd runs by within-cluster sum of squares."""
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    X = as_data_matrix(X)
    best = None
    for ss in init_seeds(seed, n_init):
        fit = lloyd_fit(X, k, seed=ss, max_iter=max_iter, tol=tol)
        if best is None or fit.within_ss < best.within_ss:
            best = fit
        if k == 1:
            break
    return best


@dataclass
class FitSeries:
    """Fits for every k in ``[k_min, k_max + 1]`` on one data matrix."""

    fits: dict[int, KMeansFit]
    k_min: int
    k_max: int

    @property
    def k_max_plus(self) -> int:
        return self.k_max + 1

    @property
    def ks(self) -> list[int]:
        return list(range(self.k_min, self.k_max + 1))

    def within_ss(self, ks=None) -> np.ndarray:
        ks = self.ks if ks is None else ks
        return np.array([self.fits[k].within_ss for k in ks])

    def __getitem__(self, k: int) -> KMeansFit:
        return self.fits[k]


def k_seed(seed, k: int) -> np.random.SeedSequence:
    """Seed for the fit at cluster count ``k``; independent of scheduling."""
    base = _seed_sequence(seed)
    return np.random.SeedSequence(entropy=base.entropy, spawn_key=base.spawn_key + (int(k),))


def fit_series(X, k_min: int, k_max: int, n_init: int = 10, seed=None,
               threads: int = 1, max_iter: int = 100, tol: float = 1e-10) -> FitSeries:
    """Best-of-``n_init`` fits for k = k_min, ..., k_max + 1."""
    X = as_data_matrix(X)
    if not 1 <= k_min <= k_max:
        raise ValueError("require 1 <= k_min <= k_max")
    if k_max + 1 > X.shape[0]:
        raise KTooLarge(f"k_max + 1 = {k_max + 1} exceeds n = {X.shape[0]}")
    ks = range(k_min, k_max + 2)

    def one(k):
        return best_of_inits(X, k, n_init=n_init, seed=k_seed(seed, k),
                             max_iter=max_iter, tol=tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = dict(zip(ks, pool.map(one, ks)))
    else:
        fits = {k: one(k) for k in ks}
    return FitSeries(fits=fits, k_min=k_min, k_max=k_max)
