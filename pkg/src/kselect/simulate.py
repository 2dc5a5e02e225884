"""Synthetic mixtures with ground-truth labels for the selection experiments."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import ortho_group

from .core import fit_series
from .evaluate import adjusted_rand_index, summarize
from .selection import SelectionConfig, select_all

log = logging.getLogger(__name__)

SCHEMES = (
    "assumptions_met",
    "varying_scale",
    "varying_shape",
    "t_tails",
    "uniform_clusters",
    "nonconvex",
)


class RejectionFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class MixtureSpec:
    scheme: str = "assumptions_met"
    k: int = 5
    d: int = 5
    n: int = 1000
    seed: int | None = 0
    separation: float = 6.0
    base_sigma: float = 1.0
    # Side of the hypercube holding the means, in units of separation * base_sigma * k**(1/d).
    box_scale: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.k < 1 or self.d < 1 or self.n < self.k:
            raise ValueError("require k >= 1, d >= 1 and n >= k")
        if not (self.separation > 0 and self.base_sigma > 0 and self.box_scale > 0):
            raise ValueError("separation, base_sigma and box_scale must be positive")


@dataclass
class LabeledDataset:
    X: np.ndarray
    labels: np.ndarray  # 1-based component ids
    spec: MixtureSpec
    means: np.ndarray = field(repr=False, default=None)


def _sample_means(spec: MixtureSpec, rng, max_attempts: int = 100_000, stall: int = 1000):
    # Sequential rejection; start over when a partial placement stops admitting new means.
    min_dist = spec.separation * spec.base_sigma
    side = spec.box_scale * min_dist * spec.k ** (1.0 / spec.d)
    means = np.empty((0, spec.d))
    misses = 0
    for _ in range(max_attempts):
        cand = rng.uniform(0.0, side, size=spec.d)
        if len(means) == 0 or np.min(np.linalg.norm(means - cand, axis=1)) >= min_dist:
            means = np.vstack([means, cand])
            misses = 0
            if len(means) == spec.k:
                return means
        else:
            misses += 1
            if misses >= stall:
                means = np.empty((0, spec.d))
                misses = 0
    raise RejectionFailure(
        f"could not place {spec.k} means {min_dist:g} apart after {max_attempts} draws"
    )


def _nonconvex_perturb(X, labels, means, sigma, rng):
    # Push points away from their own mean, harder the closer they sit to another component.
    out = X.copy()
    ks = np.unique(labels)
    if len(ks) < 2:
        return out
    scale = 2.0 * sigma
    for c in ks:
        own = labels == c
        dist_other = cdist(X[own], X[~own]).min(axis=1)
        away = X[own] - means[c - 1]
        norm = np.linalg.norm(away, axis=1, keepdims=True)
        direction = np.where(norm > 0, away / np.maximum(norm, 1e-300), 0.0)
        mag = 1.5 * sigma * np.exp(-dist_other / scale) * rng.uniform(0.5, 1.5, size=own.sum())
        out[own] += direction * mag[:, None]
    return out


def generate(spec: MixtureSpec) -> LabeledDataset:
    """Draw one data set from ``spec`` with balanced component sizes."""
    rng = np.random.default_rng(spec.seed)
    means = _sample_means(spec, rng)
    k, d, n, s = spec.k, spec.d, spec.n, spec.base_sigma
    labels = np.repeat(np.arange(1, k + 1), [n // k + (c < n % k) for c in range(k)])
    mu = means[labels - 1]

    if spec.scheme in ("assumptions_met", "nonconvex"):
        E = s * rng.standard_normal((n, d))
    elif spec.scheme == "varying_scale":
        comp_sd = s * rng.uniform(0.5, 2.0, size=k)
        E = comp_sd[labels - 1, None] * rng.standard_normal((n, d))
    elif spec.scheme == "varying_shape":
        E = np.empty((n, d))
        for c in range(k):
            rows = labels == c + 1
            Q = ortho_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))
            lam = s**2 * rng.uniform(0.25, 4.0, size=d)
            E[rows] = (rng.standard_normal((rows.sum(), d)) * np.sqrt(lam)) @ Q.T
    elif spec.scheme == "t_tails":
        E = s * rng.standard_t(3, size=(n, d))
    else:  # uniform_clusters
        E = s * rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(n, d))

    X = mu + E
    if spec.scheme == "nonconvex":
        X = _nonconvex_perturb(X, labels, means, s, rng)
    return LabeledDataset(X=X, labels=labels, spec=spec, means=means)


@dataclass
class RepOutcome:
    rep: int
    k_hat: dict[str, int]
    ari: dict[str, float]
    ideal: tuple[int, float]


@dataclass
class ScenarioSummary:
    spec: MixtureSpec
    reps: int
    outcomes: list[RepOutcome]
    k_hat: dict[str, dict[int, float]]
    ari100: dict[str, dict[int, float]]
    failures: dict[int, str]


def run_rep(spec: MixtureSpec, k_min: int = 1, k_max: int = 30, n_init: int = 10,
            config: SelectionConfig | None = None, fit_seed=0, rep: int = 0,
            threads: int = 1) -> RepOutcome:
    from .evaluate import ideal_selection

    config = config or SelectionConfig()
    data = generate(spec)
    series = fit_series(data.X, k_min, k_max, n_init=n_init, seed=fit_seed, threads=threads)
    results, errors = select_all(data.X, series, replace(config, seed=fit_seed))
    for name, exc in errors.items():
        log.warning("rep %d: %s failed: %s", rep, name, exc)
    k_hat = {r.method: int(r.k_hat) for r in results}
    ari = {m: adjusted_rand_index(series[k].assignments, data.labels) for m, k in k_hat.items()}
    return RepOutcome(rep, k_hat, ari, ideal_selection(series, data.labels))


def run_scenario(spec: MixtureSpec, reps: int = 30, config: SelectionConfig | None = None,
                 seed=0, k_min: int = 1, k_max: int = 30, n_init: int = 10,
                 centiles=(10, 50, 90), threads: int = 1) -> ScenarioSummary:
    """Repeat generate / fit / select ``reps`` times and summarise k-hat and 100 * ARI."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    config = config or SelectionConfig()
    root = np.random.SeedSequence(seed)
    outcomes, failures = [], {}
    for r, ss in enumerate(root.spawn(reps)):
        data_ss, fit_ss = ss.spawn(2)
        rep_spec = replace(spec, seed=int(data_ss.generate_state(1)[0]))
        try:
            outcomes.append(run_rep(rep_spec, k_min, k_max, n_init, config, fit_ss, r, threads))
        except Exception as exc:  # noqa: BLE001 - collected per rep
            log.warning("rep %d failed: %s", r, exc)
            failures[r] = f"{type(exc).__name__}: {exc}"
    methods = [m for m in config.methods if any(m in o.k_hat for o in outcomes)]
    k_hat = {m: summarize([o.k_hat[m] for o in outcomes if m in o.k_hat], centiles)
             for m in methods}
    ari100 = {m: summarize([100 * o.ari[m] for o in outcomes if m in o.ari], centiles)
              for m in methods}
    return ScenarioSummary(spec, reps, outcomes, k_hat, ari100, failures)
