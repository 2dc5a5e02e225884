"""Effective degrees of freedom of k-means fits.

The effective degrees of freedom of a k-means solution is ``k * d`` plus an
excess term coming from the discontinuities of the fitted values at the
points where a datum would switch cluster. For every entry ``(i, j)`` and
every other cluster ``l`` the shift ``delta`` along coordinate ``j`` that
moves row ``i`` onto the boundary with ``l`` is found from a quadratic, the
jump in the fitted value at that shift is computed in closed form, and the
jumps are weighted by a Gaussian density evaluated with plug-in parameters
taken from a larger model (``k' > k`` clusters).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    FitSeries,
    KMeansFit,
    as_data_matrix,
    best_of_inits,
    fitted_values,
    k_seed,
)

log = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class ZeroResidual(ValueError):
    pass


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


@dataclass
class NuisanceParams:
    mu_tilde: np.ndarray
    sigma_tilde: float
    k_prime: int

    def __post_init__(self):
        if not self.sigma_tilde > 0:
            raise ZeroResidual("sigma_tilde must be positive")


@dataclass
class DfCurve:
    ks: np.ndarray
    raw_df: np.ndarray
    excess_df: np.ndarray
    smoothed_df: np.ndarray
    nuisance: NuisanceParams
    bandwidth: float


class DeltaSolution(NamedTuple):
    delta: float
    target_cluster: int
    exists: bool


def nuisance_from_fit(X, fit_kprime: KMeansFit) -> NuisanceParams:
    """Plug-in mean matrix and residual scale from a (larger) fit."""
    X = as_data_matrix(X)
    if fit_kprime.within_ss <= 0:
        raise ZeroResidual(
            f"k'={fit_kprime.k} fit has zero residual; use a smaller k'"
        )
    mu = fitted_values(fit_kprime)
    sigma = math.sqrt(float(np.sum((X - mu) ** 2)) / X.size)
    return NuisanceParams(mu_tilde=mu, sigma_tilde=sigma, k_prime=fit_kprime.k)


def _quadratic_coeffs(u, u_sq, w_j, w_sq, a):
    # ||u + a*delta*e_j||^2 - ||w + delta*e_j||^2 = A delta^2 + B delta + C
    A = a * a - 1.0
    B = 2.0 * (a * u - w_j)
    C = u_sq - w_sq
    return A, B, C


def _smaller_root(A, B, C):
    """Real root of smaller magnitude of ``A x^2 + B x + C`` (vectorised, A < 0).

    Returns ``(root, exists)``. Equal magnitudes resolve to the negative root.
    """
    A, B, C = np.broadcast_arrays(*map(np.asarray, (A, B, C)))
    disc = B * B - 4.0 * A * C
    exists = disc >= 0
    sq = np.sqrt(np.where(exists, disc, 0.0))
    q = -0.5 * (B + np.where(B >= 0, 1.0, -1.0) * sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(A != 0, q / A, np.inf)
        r2 = np.where(q != 0, C / q, 0.0)
    a1, a2 = np.abs(r1), np.abs(r2)
    root = np.where(a1 < a2, r1, np.where(a2 < a1, r2, np.minimum(r1, r2)))
    return np.where(exists, root, np.nan), exists


def reassignment_delta(x_row, j: int, mu_c, n_c: int, mu_l, target_cluster: int = -1) -> DeltaSolution:
    """Shift of coordinate ``j`` of ``x_row`` at which it becomes equidistant
    from its own centroid (which moves by ``delta / n_c``) and ``mu_l``.

    ``j`` is a 0-based coordinate index.
    """
    x = np.asarray(x_row, dtype=float)
    u = x - np.asarray(mu_c, dtype=float)
    w = x - np.asarray(mu_l, dtype=float)
    a = 1.0 - 1.0 / n_c
    A, B, C = _quadratic_coeffs(u[j], u @ u, w[j], w @ w, a)
    root, exists = _smaller_root(A, B, C)
    exists = bool(exists)
    return DeltaSolution(float(root) if exists else float("nan"), target_cluster, exists)


def discontinuity_magnitude(x_ij, delta_l, mu_c_j, mu_l_j, n_c, n_l):
    """Jump of the fitted value when row i crosses into cluster l at ``delta_l``.

    Works elementwise on arrays. For ``delta_l < 0`` this is the fitted value
    just above the crossing minus the value just below it; the sign flips
    for ``delta_l >= 0``.
    """
    jump = (
        mu_c_j
        - n_l / (n_l + 1.0) * mu_l_j
        - x_ij / (n_l + 1.0)
        + delta_l * (n_l + 1.0 - n_c) / (n_c * (n_l + 1.0))
    )
    return np.where(np.asarray(delta_l) < 0, jump, -jump)[()]


def _row_blocks(n, per_row, budget=4_000_000):
    step = max(1, budget // max(per_row, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def excess_terms(X, fit: KMeansFit, nuis: NuisanceParams):
    """Per-(i, j, l) arrays ``(delta, jump, weight)`` of shape n x d x k.

    ``weight`` is ``phi((X_ij + delta - mu_tilde_ij) / sigma_tilde) / sigma_tilde``;
    entries with ``l = c(i)`` or without a real crossing are NaN / 0.
    Mainly useful for inspection; :func:`excess_df` does not materialise it.
    """
    X = as_data_matrix(X)
    n, d = X.shape
    out_delta = np.full((n, d, fit.k), np.nan)
    out_jump = np.zeros((n, d, fit.k))
    out_w = np.zeros((n, d, fit.k))
    for sl, j, delta, jump, weight, valid in _iter_terms(X, fit, nuis):
        out_delta[sl, j] = np.where(valid, delta, np.nan)
        out_jump[sl, j] = np.where(valid, jump, 0.0)
        out_w[sl, j] = np.where(valid, weight, 0.0)
    return out_delta, out_jump, out_w


def _iter_terms(X, fit, nuis):
    n, d = X.shape
    k = fit.k
    C = fit.centroids
    sizes = fit.cluster_sizes.astype(float)
    sigma = nuis.sigma_tilde
    for sl in _row_blocks(n, k * d):
        Xb = X[sl]
        cb = fit.assignments[sl]
        U = Xb - C[cb]
        u_sq = np.einsum("ij,ij->i", U, U)
        Wfull = Xb[:, None, :] - C[None, :, :]
        w_sq = np.einsum("ilj,ilj->il", Wfull, Wfull)
        n_c = sizes[cb]
        a = 1.0 - 1.0 / n_c
        other = np.ones((len(cb), k), dtype=bool)
        other[np.arange(len(cb)), cb] = False
        for j in range(d):
            A, B, Cq = _quadratic_coeffs(
                U[:, j, None], u_sq[:, None], Wfull[:, :, j], w_sq, a[:, None]
            )
            delta, exists = _smaller_root(A, B, Cq)
            valid = exists & other
            delta = np.where(valid, delta, 0.0)
            jump = discontinuity_magnitude(
                Xb[:, j, None], delta, C[cb, j][:, None], C[None, :, j],
                n_c[:, None], sizes[None, :],
            )
            z = (Xb[:, j, None] + delta - nuis.mu_tilde[sl, j, None]) / sigma
            weight = _phi(z) / sigma
            yield sl, j, delta, jump, weight, valid


def excess_df(X, fit: KMeansFit, nuis: NuisanceParams, absolute: bool = True) -> float:
    """Excess degrees of freedom of ``fit`` under plug-in parameters ``nuis``.

    Only reassignments of the shifted row itself are considered, each at the
    smaller-magnitude crossing and as though no other reassignment happened
    on the way. With ``absolute=True`` (the default) each jump enters with
    its magnitude, so every summand is non-negative; ``absolute=False`` keeps
    the signed jumps.
    """
    X = as_data_matrix(X)
    if X.shape[0] != fit.n or nuis.mu_tilde.shape != X.shape:
        raise ValueError("fit / nuisance parameters do not match X")
    if not nuis.sigma_tilde > 0:
        raise ZeroResidual("sigma_tilde must be positive")
    if fit.k == 1:
        return 0.0
    total = 0.0
    negative = 0
    for _, _, _, jump, weight, valid in _iter_terms(X, fit, nuis):
        negative += int(np.count_nonzero(valid & (jump < -1e-9)))
        if absolute:
            jump = np.abs(jump)
        total += float(np.sum(np.where(valid, weight * jump, 0.0)))
    if negative:
        # Rare but possible: the crossing is driven by other coordinates.
        log.debug("k=%d: %d signed jumps below zero", fit.k, negative)
    return total


def total_df(fit: KMeansFit, excess: float) -> float:
    """``k * d`` plus the excess degrees of freedom."""
    if excess < 0:
        raise ValueError("excess must be non-negative")
    return fit.k * fit.d + excess


def local_linear_smooth(x, y, bandwidth: float, x_eval=None) -> np.ndarray:
    """Gaussian-kernel local-linear regression of ``y`` on ``x``.

    Affine ``y`` is reproduced exactly. ``bandwidth < 1e-6`` returns ``y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_eval = x if x_eval is None else np.asarray(x_eval, dtype=float)
    if bandwidth < 1e-6:
        if x_eval is not x:
            raise ValueError("degenerate bandwidth only supported at the design points")
        return y.copy()
    out = np.empty(len(x_eval))
    for m, x0 in enumerate(x_eval):
        t = x - x0
        w = np.exp(-0.5 * (t / bandwidth) ** 2)
        s0, s1, s2 = w.sum(), (w * t).sum(), (w * t * t).sum()
        r0, r1 = (w * y).sum(), (w * t * y).sum()
        det = s0 * s2 - s1 * s1
        if det <= 1e-12 * max(s0 * s2, 1e-300):
            out[m] = r0 / s0
        else:
            out[m] = (s2 * r0 - s1 * r1) / det
    return out


def df_curve(X, series: FitSeries, bandwidth: float = 3.0, absolute: bool = True) -> DfCurve:
    """Raw and smoothed effective df for every k in the series' selection range.

    The plug-in parameters come from the ``k_max + 1`` fit.
    """
    X = as_data_matrix(X)
    nuis = nuisance_from_fit(X, series[series.k_max_plus])
    ks = np.array(series.ks)
    excess = np.array([excess_df(X, series[k], nuis, absolute=absolute) for k in ks])
    kd = ks * X.shape[1]
    raw = kd + excess
    smoothed = local_linear_smooth(ks, raw, bandwidth)
    return DfCurve(ks=ks, raw_df=raw, excess_df=excess, smoothed_df=smoothed,
                   nuisance=nuis, bandwidth=bandwidth)


def df_vs_kprime_curve(X, k: int, kprime_range, n_init: int = 10, seed=None,
                       series: FitSeries | None = None, absolute: bool = True):
    """Estimated df of the k-cluster fit as the plug-in model size k' varies.

    Fits are drawn from ``series`` when it covers a cluster count, otherwise
    computed with the same per-k seeding as :func:`~kselect.core.fit_series`,
    so k' = k reuses the model's own fit.
    """
    X = as_data_matrix(X)
    kprimes = list(kprime_range)
    if any(kp < 1 or kp > X.shape[0] - 1 for kp in kprimes):
        raise ValueError("k' must lie in [1, n - 1]")

    cache: dict[int, KMeansFit] = {}

    def get(m):
        if series is not None and m in series.fits:
            return series.fits[m]
        if m not in cache:
            cache[m] = best_of_inits(X, m, n_init=n_init, seed=k_seed(seed, m))
        return cache[m]

    fit = get(k)
    out = []
    for kp in kprimes:
        nuis = nuisance_from_fit(X, get(kp))
        out.append((kp, total_df(fit, excess_df(X, fit, nuis, absolute=absolute))))
    return out


def _fresh(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=seed.spawn_key)
    return np.random.SeedSequence(seed)


def direct_sampling(mu_truth, sigma: float, ks, n_reps: int, n_init: int = 10, seed=None,
                    k_prime: int | None = None, absolute: bool = True):
    """Direct-sampling effective df, optionally next to the averaged estimate.

    Draws ``n_reps`` data sets ``mu_truth + sigma * Z`` and fits k-means for
    every k in ``ks``. Returns ``(oracle, estimate)`` where ``oracle[m]`` is
    ``sum_ij sampleCov(M(X)_ij, X_ij) / sigma^2`` (n_reps - 1 denominator)
    for ``ks[m]``, and ``estimate[m]`` is the plug-in df estimate (with
    parameters from a ``k_prime`` fit on the same draw) averaged over the
    draws, or ``None`` when ``k_prime`` is not given.
    """
    mu = as_data_matrix(mu_truth)
    if n_reps < 2:
        raise ValueError("n_reps must be >= 2")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    ks = list(ks)
    if k_prime is not None and k_prime <= max(ks):
        raise ValueError("k_prime must exceed every k")
    # Running sums of E, F and E*F, with E = X - mu and F = M(X) - mu.
    s_e = np.zeros(mu.shape)
    s_f = np.zeros((len(ks),) + mu.shape)
    s_ef = np.zeros((len(ks),) + mu.shape)
    est = np.zeros(len(ks))
    for ss in _fresh(seed).spawn(n_reps):
        noise_ss, fit_ss = ss.spawn(2)
        E = sigma * np.random.default_rng(noise_ss).standard_normal(mu.shape)
        X = mu + E
        s_e += E
        if k_prime is not None:
            nuis = nuisance_from_fit(X, best_of_inits(X, k_prime, n_init, seed=k_seed(fit_ss, k_prime)))
        for m, k in enumerate(ks):
            fit = best_of_inits(X, k, n_init=n_init, seed=k_seed(fit_ss, k))
            F = fitted_values(fit) - mu
            s_f[m] += F
            s_ef[m] += E * F
            if k_prime is not None:
                est[m] += total_df(fit, excess_df(X, fit, nuis, absolute=absolute))
    R = float(n_reps)
    cov = (s_ef - s_f * s_e[None] / R) / (R - 1.0)
    oracle = cov.sum(axis=(1, 2)) / sigma**2
    return oracle, (est / R if k_prime is not None else None)


def monte_carlo_df_curve(mu_truth, sigma: float, ks, n_reps: int, n_init: int = 10,
                         seed=None) -> np.ndarray:
    """Direct-sampling effective df for each k in ``ks`` (shared draws)."""
    return direct_sampling(mu_truth, sigma, ks, n_reps, n_init, seed)[0]


def monte_carlo_df_oracle(mu_truth, sigma: float, k: int, n_reps: int, n_init: int = 10,
                          seed=None) -> float:
    """Direct-sampling effective df of the k-cluster model at one k."""
    return float(monte_carlo_df_curve(mu_truth, sigma, [k], n_reps, n_init, seed)[0])


class SteinCheck(NamedTuple):
    lhs: float
    rhs: float
    se: float


def stein_identity_check(mu: float, sigma: float, threshold: float, n_draws: int,
                         seed=None) -> SteinCheck:
    """Monte-Carlo check of the jump-corrected Stein identity for a step function.

    For ``f(x) = 1[x > threshold]`` and ``X ~ N(mu, sigma^2)`` the covariance
    ``Cov(f(X), X) / sigma^2`` equals ``phi((threshold - mu) / sigma) / sigma``
    (no smooth part, one unit jump). ``se`` is the standard error of ``lhs``.
    """
    if n_draws < 1000:
        raise ValueError("n_draws must be >= 1000")
    x = np.random.default_rng(seed).normal(mu, sigma, size=n_draws)
    f = (x > threshold).astype(float)
    prod = (f - f.mean()) * (x - x.mean())
    lhs = prod.sum() / (n_draws - 1) / sigma**2
    se = prod.std(ddof=1) / math.sqrt(n_draws) / sigma**2
    rhs = float(_phi((threshold - mu) / sigma)) / sigma
    return SteinCheck(float(lhs), rhs, float(se))
