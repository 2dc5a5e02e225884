"""Partition agreement (Rand / adjusted Rand) and experiment summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LengthMismatch(ValueError):
    pass


class NonpositiveIdeal(ValueError):
    pass


@dataclass
class ContingencyTable:
    counts: np.ndarray

    @property
    def row_sums(self):
        return self.counts.sum(axis=1)

    @property
    def col_sums(self):
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(a, b) -> ContingencyTable:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"label vectors differ: {a.shape} vs {b.shape}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    counts = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(counts, (ia, ib), 1)
    return ContingencyTable(counts)


def _comb2(x) -> int:
    x = np.asarray(x, dtype=np.int64)
    return int((x * (x - 1) // 2).sum())


def _pair_sums(a, b):
    # Integer pair counts: same in both, same in a, same in b, all pairs.
    t = contingency(a, b)
    n = t.total
    if n < 2:
        raise ValueError("need at least two points")
    return _comb2(t.counts), _comb2(t.row_sums), _comb2(t.col_sums), n * (n - 1) // 2


def rand_index(a, b) -> float:
    """Fraction of point pairs on which the two partitions agree."""
    both, sa, sb, total = _pair_sums(a, b)
    return (total + 2 * both - sa - sb) / total


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index.

    Computed in exact integer arithmetic up to one final division. When the
    expected and maximal index coincide (both partitions trivial) the result
    is 1 if the partitions agree and 0 otherwise.
    """
    both, sa, sb, total = _pair_sums(a, b)
    # (index - expected) / (max - expected), scaled by 2 * total.
    num = 2 * (both * total - sa * sb)
    den = (sa + sb) * total - 2 * sa * sb
    if den == 0:
        return 1.0 if num == 0 and 2 * both == sa + sb else 0.0
    return num / den


def mean_ari(labels, truths) -> float:
    """ARI averaged over several ground-truth label sets."""
    return float(np.mean([adjusted_rand_index(labels, t) for t in truths]))


def ideal_selection(series, truth) -> tuple[int, float]:
    """The k in the selection range whose fit best matches ``truth`` (smallest on ties).

    ``truth`` may be one label vector or a list of them (scores are averaged).
    """
    truth = np.asarray(truth)
    truths = truth if truth.ndim == 2 else truth[None, :]
    best_k, best = None, -np.inf
    for k in series.ks:
        score = mean_ari(series[k].assignments, truths)
        if score > best:
            best_k, best = k, score
    return best_k, float(best)


def normalized_regret(ari_ideal: float, ari_method: float) -> float:
    if ari_ideal <= 0:
        raise NonpositiveIdeal(f"ideal ARI {ari_ideal} is not positive")
    return (ari_ideal - ari_method) / ari_ideal


def summarize(values, centiles=(10, 50, 90)) -> dict[int, float]:
    """Centiles with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("nothing to summarise")
    return {int(p): float(np.percentile(v, p)) for p in centiles}
