"""Cluster-number selectors run on a shared :class:`~kselect.core.FitSeries`."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .core import FitSeries, as_data_matrix, best_of_inits, k_seed
from .edf import df_curve

log = logging.getLogger(__name__)

METHODS = ("bic_edf", "bic_naive", "gap", "fk", "silhouette", "jump")


class AllDegenerate(ValueError):
    pass


@dataclass
class SelectionResult:
    method: str
    k_hat: int
    ks: list[int]
    scores: np.ndarray
    aux: dict[str, np.ndarray] = field(default_factory=dict)
    runtime_ms: float = 0.0


@dataclass
class BicCurve:
    ks: np.ndarray
    bic: np.ndarray
    df_used: np.ndarray


def first_local_minimum(scores, ks) -> int:
    """Smallest interior k that is a local minimum of ``scores``.

    A dip needs a strict decrease from the left and no increase to the
    right, so the earliest point of a plateau wins. Without an interior
    minimum the endpoint with the lower score is returned.
    """
    s = np.asarray(scores, dtype=float)
    ks = list(ks)
    if len(s) < 2 or len(s) != len(ks):
        raise ValueError("need at least two scores, one per k")
    for m in range(1, len(s) - 1):
        if s[m] < s[m - 1] and s[m] <= s[m + 1]:
            return ks[m]
    return ks[0] if s[0] <= s[-1] else ks[-1]


def _rss_floor(X):
    return 1e-12 * float(np.sum((X - X.mean(axis=0)) ** 2))


def bic_curve(X, series: FitSeries, df) -> BicCurve:
    """``n d log(RSS_k) + log(n d) df_k`` for every k in the selection range."""
    X = as_data_matrix(X)
    nd = X.size
    ks = np.array(series.ks)
    df = np.asarray(df, dtype=float)
    if len(df) != len(ks):
        raise ValueError("df must have one entry per k in the selection range")
    rss = series.within_ss()
    eps = _rss_floor(X)
    if np.all(rss <= eps):
        raise AllDegenerate("every within-cluster sum of squares is zero")
    bic = nd * np.log(np.maximum(rss, eps)) + math.log(nd) * df
    return BicCurve(ks=ks, bic=bic, df_used=df)


def bic_select(X, series: FitSeries, df, method: str = "bic_edf") -> SelectionResult:
    curve = bic_curve(X, series, df)
    k_hat = first_local_minimum(curve.bic, curve.ks)
    return SelectionResult(method, k_hat, list(curve.ks), curve.bic, {"df": curve.df_used})


def bic_edf_select(X, series: FitSeries, bandwidth: float = 3.0, use_smoothed: bool = True,
                   absolute: bool = True) -> SelectionResult:
    """BIC with the estimated effective degrees of freedom."""
    curve = df_curve(X, series, bandwidth=bandwidth, absolute=absolute)
    df = curve.smoothed_df if use_smoothed else curve.raw_df
    res = bic_select(X, series, df, method="bic_edf")
    res.aux.update(raw_df=curve.raw_df, excess_df=curve.excess_df,
                   smoothed_df=curve.smoothed_df)
    return res


def bic_naive_select(X, series: FitSeries) -> SelectionResult:
    """BIC with the explicit model dimension ``k d`` as degrees of freedom."""
    X = as_data_matrix(X)
    df = np.array(series.ks, dtype=float) * X.shape[1]
    return bic_select(X, series, df, method="bic_naive")


def gap_rule(gap, s, ks) -> int:
    """Smallest k with ``Gap(k) >= Gap(k+1) - s(k+1)``; the last k otherwise."""
    gap = np.asarray(gap, dtype=float)
    s = np.broadcast_to(np.asarray(s, dtype=float), gap.shape)
    ks = list(ks)
    for m in range(len(ks) - 1):
        if gap[m] >= gap[m + 1] - s[m + 1]:
            return ks[m]
    return ks[-1]


def _reference_sampler(X, reference: str):
    if reference == "box":
        lo, hi = X.min(axis=0), X.max(axis=0)
        return lambda rng: lo + (hi - lo) * rng.random(X.shape)
    if reference == "pca":
        # Uniform over the box aligned with the principal axes of the centred data.
        centre = X.mean(axis=0)
        _, _, Vt = np.linalg.svd(X - centre, full_matrices=False)
        # Fix the sign of each axis so the draws do not depend on LAPACK's choice.
        pivot = np.argmax(np.abs(Vt), axis=1)
        Vt = Vt * np.sign(Vt[np.arange(len(Vt)), pivot])[:, None]
        Y = (X - centre) @ Vt.T
        lo, hi = Y.min(axis=0), Y.max(axis=0)
        return lambda rng: centre + (lo + (hi - lo) * rng.random(Y.shape)) @ Vt
    raise ValueError(f"unknown gap reference {reference!r}")


def gap_select(X, series: FitSeries, B: int = 50, seed=None,
               reference: str = "box") -> SelectionResult:
    """Gap statistic against uniform reference data.

    ``reference="box"`` draws uniformly over the per-feature ranges of X,
    ``"pca"`` over the box spanned by the principal components. Reference
    data sets are clustered with a single initialisation. The reference
    draws depend only on ``seed`` and on summaries of X that do not change
    under row permutation.
    """
    X = as_data_matrix(X)
    if B < 2:
        raise ValueError("B must be >= 2")
    ks = series.ks
    sample = _reference_sampler(X, reference)
    floor = max(_rss_floor(X), 1e-300)
    log_w = np.log(np.maximum(series.within_ss(), floor))
    root = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    ref_seeds = np.random.SeedSequence(entropy=root.entropy,
                                       spawn_key=root.spawn_key + (0x6A9,)).spawn(B)
    log_ref = np.empty((B, len(ks)))
    for b, ss in enumerate(ref_seeds):
        data_ss, fit_ss = ss.spawn(2)
        Z = sample(np.random.default_rng(data_ss))
        ref_floor = max(_rss_floor(Z), 1e-300)
        for m, k in enumerate(ks):
            fit = best_of_inits(Z, k, n_init=1, seed=k_seed(fit_ss, k))
            log_ref[b, m] = math.log(max(fit.within_ss, ref_floor))
    gap = log_ref.mean(axis=0) - log_w
    s = log_ref.std(axis=0, ddof=1) * math.sqrt(1.0 + 1.0 / B)
    return SelectionResult("gap", gap_rule(gap, s, ks), list(ks), gap, {"s": s})


def fk_values(S, d: int) -> np.ndarray:
    """``f(K)`` for K = 1, 2, ... given within-cluster sums ``S[K-1]``."""
    if d < 2:
        raise ValueError("fK requires d >= 2")
    S = np.asarray(S, dtype=float)
    f = np.ones(len(S))
    alpha = 1.0 - 3.0 / (4.0 * d)
    for m in range(1, len(S)):
        if m > 1:
            alpha = alpha + (1.0 - alpha) / 6.0
        if S[m - 1] != 0:
            f[m] = S[m] / (alpha * S[m - 1])
    return f


def fk_select(X, series: FitSeries, threshold: float = 0.85) -> SelectionResult:
    """Method of Pham, Dimov and Nguyen: minimise f(K) if it drops below 0.85."""
    X = as_data_matrix(X)
    K = np.arange(1, series.k_max + 1)
    S = [series.fits[k].within_ss if k in series.fits else np.nan for k in K]
    if series.k_min > 1 and any(np.isnan(S[: series.k_min - 1])):
        # Missing fits below k_min only affect f at k_min, which then counts as 1.
        S = np.array(S)
        S[np.isnan(S)] = 0.0
    f = fk_values(S, X.shape[1])[series.k_min - 1:]
    ks = series.ks
    m = int(np.argmin(f))
    k_hat = ks[m] if f[m] < threshold else ks[0]
    return SelectionResult("fk", k_hat, list(ks), f)


def mean_silhouette(X, labels, block: int = 2048) -> float:
    """Mean silhouette width with Euclidean distances; singletons score 0."""
    X = as_data_matrix(X)
    labels = np.asarray(labels)
    _, lab = np.unique(labels, return_inverse=True)
    k = lab.max() + 1
    if k < 2:
        raise ValueError("silhouette needs at least two clusters")
    sizes = np.bincount(lab, minlength=k).astype(float)
    onehot = np.zeros((len(lab), k))
    onehot[np.arange(len(lab)), lab] = 1.0
    s = np.empty(len(lab))
    for start in range(0, len(lab), block):
        sl = slice(start, min(len(lab), start + block))
        sums = cdist(X[sl], X) @ onehot
        own = lab[sl]
        rows = np.arange(sums.shape[0])
        n_own = sizes[own]
        a = np.where(n_own > 1, sums[rows, own] / np.maximum(n_own - 1, 1), 0.0)
        other = sums / sizes[None, :]
        other[rows, own] = np.inf
        b = other.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            si = np.where(denom > 0, (b - a) / denom, 0.0)
        s[sl] = np.where(n_own > 1, si, 0.0)
    return float(s.mean())


def silhouette_select(X, series: FitSeries) -> SelectionResult:
    X = as_data_matrix(X)
    ks = [k for k in series.ks if 2 <= k <= X.shape[0] - 1]
    if not ks:
        raise ValueError("silhouette needs some k in [2, n - 1]")
    scores = np.array([mean_silhouette(X, series.fits[k].assignments) for k in ks])
    return SelectionResult("silhouette", ks[int(np.argmax(scores))], ks, scores)


def jump_values(distortions, power: float, d0_transformed: float = 0.0):
    """Transformed distortions ``D^-power`` and their first differences."""
    D = np.asarray(distortions, dtype=float)
    tiny = np.finfo(float).tiny
    T = np.maximum(D, tiny) ** (-power)
    J = np.diff(np.concatenate([[d0_transformed], T]))
    return T, J


def jump_select(X, series: FitSeries, power: float | None = None) -> SelectionResult:
    """Jump statistic of Sugar and James with ``Y = d / 2`` by default."""
    X = as_data_matrix(X)
    n, d = X.shape
    Y = d / 2.0 if power is None else power
    ks = series.ks
    eps = max(_rss_floor(X), np.finfo(float).tiny) / X.size
    D = np.maximum(series.within_ss() / X.size, eps)
    before = series.k_min - 1
    if before >= 1 and before in series.fits:
        d0 = max(series.fits[before].within_ss / X.size, eps) ** (-Y)
    else:
        d0 = 0.0
    with np.errstate(over="ignore"):
        T, J = jump_values(D, Y, d0)
    return SelectionResult("jump", ks[int(np.argmax(J))], list(ks), J, {"transformed": T})


@dataclass
class SelectionConfig:
    methods: tuple[str, ...] = METHODS
    bandwidth: float = 3.0
    use_smoothed: bool = True
    gap_B: int = 50
    gap_reference: str = "box"
    jump_power: float | None = None
    fk_threshold: float = 0.85
    absolute_jumps: bool = True
    seed: object = 0


def select_all(X, series: FitSeries, config: SelectionConfig | None = None):
    """Run every enabled selector on the same fits.

    Returns ``(results, errors)``; a failing selector is logged and reported
    in ``errors`` without stopping the others.
    """
    config = config or SelectionConfig()
    unknown = set(config.methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    runners = {
        "bic_edf": lambda: bic_edf_select(X, series, config.bandwidth, config.use_smoothed,
                                          config.absolute_jumps),
        "bic_naive": lambda: bic_naive_select(X, series),
        "gap": lambda: gap_select(X, series, config.gap_B, config.seed, config.gap_reference),
        "fk": lambda: fk_select(X, series, config.fk_threshold),
        "silhouette": lambda: silhouette_select(X, series),
        "jump": lambda: jump_select(X, series, config.jump_power),
    }
    results, errors = [], {}
    for name in METHODS:
        if name not in config.methods:
            continue
        t0 = time.perf_counter()
        try:
            res = runners[name]()
        except Exception as exc:  # noqa: BLE001 - aggregated per method
            log.warning("selector %s failed: %s", name, exc)
            errors[name] = exc
            continue
        res.runtime_ms = (time.perf_counter() - t0) * 1e3
        results.append(res)
    return results, errors
