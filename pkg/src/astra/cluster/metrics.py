"""Cluster validity indices and partition-agreement statistics.

Raw metrics exclude noise points (label -1). Degenerate geometry (zero
within-cluster dispersion, coincident centroids) is reported through a
capped sentinel plus a flag instead of infinities so downstream min-max
normalization stays finite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algorithms import pairwise_distances

# Cap applied where CH or DB would be infinite (zero dispersion / coincident
# centroids). Finite values beyond the cap are clipped to it as well, so a
# fully degenerate partition never ranks below an almost-degenerate one and
# min-max normalization stays usable.
DEGENERACY_SENTINEL = 1e12


class MetricError(ValueError):
    """Raised when a validity metric is undefined for the given partition."""


@dataclass(frozen=True)
class QualityScores:
    """Raw validity indices plus sweep-normalized values filled in later."""

    silhouette: float
    calinski_harabasz: float
    davies_bouldin: float
    degenerate: bool = False
    sil_hat: float | None = None
    ch_hat: float | None = None
    db_hat: float | None = None
    composite: float | None = None


def _non_noise(points: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels, dtype=int)
    mask = labels >= 0
    return np.asarray(points, dtype=float)[mask], labels[mask]


def silhouette_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette over non-noise points (standard a/b definition)."""
    X, y = _non_noise(points, labels)
    clusters = np.unique(y)
    if clusters.shape[0] < 2:
        raise MetricError("silhouette requires at least 2 non-empty clusters")
    dist = pairwise_distances(X)
    n = X.shape[0]
    scores = np.zeros(n)
    for i in range(n):
        own = y == y[i]
        own_size = int(own.sum())
        if own_size == 1:
            scores[i] = 0.0
            continue
        a = dist[i, own].sum() / (own_size - 1)
        b = min(dist[i, y == c].mean() for c in clusters if c != y[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def calinski_harabasz_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Between/within dispersion ratio: (B/(K-1)) / (W/(n-K))."""
    X, y = _non_noise(points, labels)
    clusters = np.unique(y)
    n, k = X.shape[0], clusters.shape[0]
    if k < 2:
        raise MetricError("calinski-harabasz requires at least 2 non-empty clusters")
    overall = X.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in clusters:
        member = X[y == c]
        centroid = member.mean(axis=0)
        between += member.shape[0] * float(((centroid - overall) ** 2).sum())
        within += float(((member - centroid) ** 2).sum())
    if within <= 0 or n == k:
        return DEGENERACY_SENTINEL
    return float(min((between / (k - 1)) / (within / (n - k)), DEGENERACY_SENTINEL))


def davies_bouldin_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean over clusters of the worst (S_i + S_j) / M_ij pair similarity."""
    X, y = _non_noise(points, labels)
    clusters = np.unique(y)
    k = clusters.shape[0]
    if k < 2:
        raise MetricError("davies-bouldin requires at least 2 non-empty clusters")
    centroids = np.stack([X[y == c].mean(axis=0) for c in clusters])
    scatter = np.array(
        [
            float(np.linalg.norm(X[y == c] - centroids[idx], axis=1).mean())
            for idx, c in enumerate(clusters)
        ]
    )
    worst = np.zeros(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if i == j:
                continue
            sep = float(np.linalg.norm(centroids[i] - centroids[j]))
            if sep == 0:
                return DEGENERACY_SENTINEL
            ratios.append((scatter[i] + scatter[j]) / sep)
        worst[i] = max(ratios)
    return float(min(worst.mean(), DEGENERACY_SENTINEL))


def has_degenerate_geometry(points: np.ndarray, labels: np.ndarray) -> bool:
    """True when CH or DB hit the sentinel cap for this partition."""
    return (
        calinski_harabasz_score(points, labels) >= DEGENERACY_SENTINEL
        or davies_bouldin_score(points, labels) >= DEGENERACY_SENTINEL
    )


def validity_metrics(points: np.ndarray, labels: np.ndarray) -> QualityScores:
    """Raw silhouette / CH / DB for one partition (noise excluded)."""
    ch = calinski_harabasz_score(points, labels)
    db = davies_bouldin_score(points, labels)
    return QualityScores(
        silhouette=silhouette_score(points, labels),
        calinski_harabasz=ch,
        davies_bouldin=db,
        degenerate=ch >= DEGENERACY_SENTINEL or db >= DEGENERACY_SENTINEL,
    )


# ---------------------------------------------------------------------------
# Partition agreement
# ---------------------------------------------------------------------------


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.shape != b.shape:
        raise ValueError("label arrays must have equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def adjusted_rand_index(a: np.ndarray, b: np.ndarray) -> float:
    """Adjusted Rand index between two labelings of the same points."""
    table = _contingency(a, b)
    n = table.sum()

    def comb2(x: np.ndarray) -> float:
        return float((x * (x - 1) // 2).sum())

    sum_cells = comb2(table)
    sum_rows = comb2(table.sum(axis=1))
    sum_cols = comb2(table.sum(axis=0))
    total = n * (n - 1) / 2
    if total == 0:
        return 1.0
    expected = sum_rows * sum_cols / total
    max_index = (sum_rows + sum_cols) / 2
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def normalized_mutual_info(a: np.ndarray, b: np.ndarray) -> float:
    """NMI with arithmetic-mean normalization of the two label entropies."""
    table = _contingency(a, b).astype(float)
    n = table.sum()
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    pab = table / n
    nz = pab > 0
    mi = float(np.sum(pab[nz] * np.log(pab[nz] / np.outer(pa, pb)[nz])))
    ha = float(-np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    hb = float(-np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    denom = (ha + hb) / 2
    if denom == 0:
        # both partitions trivial: identical single-cluster labelings agree
        return 1.0
    return float(mi / denom)
