"""Self-contained UMAP-style dimensionality reduction.

The projector follows the standard recipe: exact kNN, per-point smooth-kNN
calibration (binary search for the bandwidth with local connectivity 1),
a fuzzy union via the probabilistic t-conorm, curve parameters fitted from
(min_dist, spread), spectral initialization from the normalized graph
Laplacian (power iteration with deflation, seeded-noise fallback), and
negative-sampling SGD on the cross-entropy layout objective.

Determinism: for a fixed seed and fixed input order the projection is
bitwise reproducible. Rows are internally processed in canonical
(lexicographic) order, so permuting input rows permutes output rows the
same way.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import curve_fit

from ._sgd import run_layout_epoch

log = logging.getLogger(__name__)

SMOOTH_K_TOLERANCE = 1e-5
MIN_K_DIST_SCALE = 1e-3

Metric = Literal["cosine", "euclidean"]


class ManifoldError(ValueError):
    """Raised for invalid projection inputs or configuration."""


@dataclass(frozen=True)
class ManifoldConfig:
    n_neighbors: int = 10
    min_dist: float = 0.0
    spread: float = 1.0
    out_dims: int = 2
    metric: Metric = "cosine"
    n_epochs: int = 500
    negative_sample_rate: int = 5
    learning_rate: float = 1.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_neighbors < 2:
            raise ManifoldError("n_neighbors must be >= 2")
        if self.min_dist < 0:
            raise ManifoldError("min_dist must be nonnegative")
        if self.min_dist > self.spread:
            raise ManifoldError("min_dist must not exceed spread")
        if self.out_dims < 2:
            raise ManifoldError("out_dims must be >= 2")
        if self.metric not in ("cosine", "euclidean"):
            raise ManifoldError(f"unknown metric {self.metric!r}")
        if self.n_epochs < 1 or self.negative_sample_rate < 1:
            raise ManifoldError("n_epochs and negative_sample_rate must be >= 1")
        if self.learning_rate <= 0:
            raise ManifoldError("learning_rate must be positive")


@dataclass(frozen=True)
class Projection:
    coordinates: np.ndarray
    config: ManifoldConfig
    loss_trace: np.ndarray


# ---------------------------------------------------------------------------
# kNN graph
# ---------------------------------------------------------------------------


def _distance_matrix(points: np.ndarray, metric: str) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if metric == "euclidean":
        sq = (X**2).sum(axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        return np.sqrt(np.maximum(d2, 0.0))
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = X / safe[:, None]
    sim = np.clip(unit @ unit.T, -1.0, 1.0)
    return 1.0 - sim


def build_knn_graph(
    points: np.ndarray, k: int, metric: Metric = "euclidean"
) -> tuple[np.ndarray, np.ndarray]:
    """Exact brute-force kNN: (indices, distances), each of shape (n, k).

    Self is excluded by index; distance ties resolve in index order.
    """
    X = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ManifoldError("kNN input contains non-finite values")
    n = X.shape[0]
    if not 1 <= k < n:
        raise ManifoldError(f"k={k} out of range [1, {n - 1}]")
    dist = _distance_matrix(X, metric)
    order = np.argsort(dist, axis=1, kind="stable")
    indices = np.zeros((n, k), dtype=np.int64)
    distances = np.zeros((n, k))
    for i in range(n):
        row = order[i][order[i] != i][:k]
        indices[i] = row
        distances[i] = dist[i, row]
    return indices, distances


# ---------------------------------------------------------------------------
# Fuzzy graph construction
# ---------------------------------------------------------------------------


def smooth_knn_calibration(
    knn_dists: np.ndarray, n_iter: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (sigma, rho) such that the fuzzy set has cardinality
    ~log2(k); local connectivity 1 (nearest nonzero neighbor fully connected)."""
    n, k = knn_dists.shape
    target = np.log2(k)
    rho = np.zeros(n)
    sigma = np.zeros(n)
    mean_all = knn_dists.mean()
    for i in range(n):
        row = knn_dists[i]
        nonzero = row[row > 0.0]
        if nonzero.shape[0] > 0:
            rho[i] = nonzero[0]
        lo, mid, hi = 0.0, 1.0, np.inf
        for _ in range(n_iter):
            psum = 0.0
            for j in range(1, k):
                d = row[j] - rho[i]
                psum += np.exp(-(d / mid)) if d > 0 else 1.0
            if abs(psum - target) < SMOOTH_K_TOLERANCE:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        sigma[i] = mid
        floor = MIN_K_DIST_SCALE * (row.mean() if rho[i] > 0.0 else mean_all)
        if sigma[i] < floor:
            sigma[i] = floor
    return sigma, rho


def fuzzy_simplicial_set(
    knn_indices: np.ndarray, knn_dists: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Symmetrized membership graph as parallel (rows, cols, weights) arrays.

    Directional memberships exp(-(d - rho)/sigma) are combined with the
    probabilistic t-conorm  A + A' - A*A'.
    """
    n, k = knn_indices.shape
    sigma, rho = smooth_knn_calibration(knn_dists)
    strength = np.zeros((n, n))
    for i in range(n):
        for j in range(k):
            t = knn_indices[i, j]
            if t == i:
                continue
            d = knn_dists[i, j] - rho[i]
            val = 1.0 if (d <= 0.0 or sigma[i] == 0.0) else np.exp(-d / sigma[i])
            strength[i, t] = val
    union = strength + strength.T - strength * strength.T
    rows, cols = np.nonzero(union)
    return rows, cols, union[rows, cols]


def find_ab_params(spread: float, min_dist: float) -> tuple[float, float]:
    """Least-squares fit of 1/(1 + a x^(2b)) to the offset exponential
    membership curve over [0, 3*spread]."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.zeros_like(xv)
    yv[xv < min_dist] = 1.0
    tail = xv >= min_dist
    yv[tail] = np.exp(-(xv[tail] - min_dist) / spread)
    params, _ = curve_fit(curve, xv, yv)
    return float(params[0]), float(params[1])


# ---------------------------------------------------------------------------
# Spectral initialization
# ---------------------------------------------------------------------------


def _spectral_init(
    rows: np.ndarray,
    cols: np.ndarray,
    weights: np.ndarray,
    n: int,
    dim: int,
    rng: np.random.Generator,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> np.ndarray:
    """Trailing eigenvectors of the normalized graph Laplacian via power
    iteration with deflation (on 2I - L, whose leading eigenvectors are the
    Laplacian's trailing ones)."""
    adjacency = np.zeros((n, n))
    adjacency[rows, cols] = weights
    degree = adjacency.sum(axis=1)
    inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(np.maximum(degree, 1e-12)), 0.0)
    lap = np.eye(n) - (inv_sqrt[:, None] * adjacency) * inv_sqrt[None, :]
    M = 2.0 * np.eye(n) - lap

    # The trivial top eigenvector of M is known analytically; deflate it.
    v0 = np.sqrt(np.maximum(degree, 0.0))
    norm0 = np.linalg.norm(v0)
    if norm0 == 0:
        raise ManifoldError("graph has no edges")
    found = [v0 / norm0]
    for _ in range(dim):
        v = rng.standard_normal(n)
        for _ in range(max_iter):
            for u in found:
                v -= (u @ v) * u
            w = M @ v
            for u in found:
                w -= (u @ w) * u
            norm_w = np.linalg.norm(w)
            if norm_w < 1e-12:
                v = rng.standard_normal(n)
                continue
            w /= norm_w
            if np.linalg.norm(w - v) < tol:
                v = w
                break
            v = w
        found.append(v)
    return np.column_stack(found[1 : dim + 1])


def _rescale_init(init: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Scale each axis to [0, 10]; jitter duplicates with seeded noise so
    coincident points can separate during optimization."""
    spans = init.max(axis=0) - init.min(axis=0)
    spans[spans == 0] = 1.0
    emb = 10.0 * (init - init.min(axis=0)) / spans
    if np.unique(emb, axis=0).shape[0] < emb.shape[0]:
        emb = emb + rng.normal(scale=1e-4, size=emb.shape)
    return np.ascontiguousarray(emb, dtype=np.float64)


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------


def _make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    result = np.full(weights.shape[0], -1.0)
    n_samples = n_epochs * (weights / weights.max())
    mask = n_samples > 0
    result[mask] = float(n_epochs) / n_samples[mask]
    return result


def _edge_cross_entropy(
    embedding: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    weights: np.ndarray,
    a: float,
    b: float,
) -> float:
    diff = embedding[rows] - embedding[cols]
    d2 = (diff**2).sum(axis=1)
    q = 1.0 / (1.0 + a * d2**b)
    eps = 1e-12
    return float(
        -(weights * np.log(np.maximum(q, eps))).sum()
        - ((1.0 - weights) * np.log(np.maximum(1.0 - q, eps))).sum()
    )


def umap_project(features: np.ndarray, config: ManifoldConfig) -> Projection:
    """Project ``features`` to ``config.out_dims`` dimensions."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ManifoldError("input must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise ManifoldError("input contains non-finite values")
    n = X.shape[0]
    if n < config.n_neighbors + 1:
        raise ManifoldError(
            f"need at least n_neighbors+1={config.n_neighbors + 1} rows, got {n}"
        )

    # Canonical (lexicographic) row order makes the projection equivariant
    # to input row permutations.
    order = np.lexsort(X.T[::-1])
    inverse = np.empty(n, dtype=int)
    inverse[order] = np.arange(n)
    Xc = X[order]

    knn_idx, knn_dist = build_knn_graph(Xc, config.n_neighbors, config.metric)
    rows, cols, weights = fuzzy_simplicial_set(knn_idx, knn_dist)
    a, b = find_ab_params(config.spread, config.min_dist)

    rng = np.random.default_rng(config.rng_seed)
    try:
        init = _spectral_init(rows, cols, weights, n, config.out_dims, rng)
    except Exception:
        log.warning("spectral initialization failed; using seeded noise")
        init = rng.uniform(-10.0, 10.0, size=(n, config.out_dims))
    embedding = _rescale_init(init, rng)

    # Edges too weak to be sampled at least once are dropped up front.
    keep = weights >= weights.max() / float(config.n_epochs)
    rows, cols, weights = rows[keep], cols[keep], weights[keep]
    epochs_per_sample = _make_epochs_per_sample(weights, config.n_epochs)
    epochs_per_negative = epochs_per_sample / config.negative_sample_rate
    epoch_of_next_sample = epochs_per_sample.copy()
    epoch_of_next_negative = epochs_per_negative.copy()

    head = rows.astype(np.int32)
    tail = cols.astype(np.int32)
    rng_state = rng.integers(
        np.iinfo(np.int32).min + 1, np.iinfo(np.int32).max - 1, size=3
    ).astype(np.int64)

    loss_trace = np.zeros(config.n_epochs)
    alpha = config.learning_rate
    for epoch in range(config.n_epochs):
        run_layout_epoch(
            embedding,
            head,
            tail,
            epochs_per_sample,
            epochs_per_negative,
            epoch_of_next_sample,
            epoch_of_next_negative,
            a,
            b,
            rng_state,
            1.0,
            alpha,
            epoch,
            n,
        )
        alpha = config.learning_rate * (1.0 - (epoch + 1) / config.n_epochs)
        loss_trace[epoch] = _edge_cross_entropy(embedding, rows, cols, weights, a, b)

    _merge_identical_rows(Xc, embedding)
    return Projection(
        coordinates=embedding[inverse], config=config, loss_trace=loss_trace
    )


def _merge_identical_rows(canonical_input: np.ndarray, embedding: np.ndarray) -> None:
    """Identical input rows get identical coordinates (their group mean).

    The init jitter lets coincident points move during optimization, but the
    projection is a function of the input rows, so duplicates are snapped
    back together afterwards.
    """
    n = canonical_input.shape[0]
    start = 0
    for i in range(1, n + 1):
        if i == n or not np.array_equal(canonical_input[i], canonical_input[start]):
            if i - start > 1:
                embedding[start:i] = embedding[start:i].mean(axis=0)
            start = i


# ---------------------------------------------------------------------------
# Embedding quality
# ---------------------------------------------------------------------------


def trustworthiness(high: np.ndarray, low: np.ndarray, k: int) -> float:
    """Share of low-space neighbors that are not intruders, in [0, 1].

    1.0 means every k-nearest neighbor in the projection was already a
    k-nearest neighbor in the original space. Rank ties resolve in index
    order in both spaces, so identical point sets score 1.0.
    """
    H = np.asarray(high, dtype=float)
    L = np.asarray(low, dtype=float)
    if H.shape[0] != L.shape[0]:
        raise ManifoldError("row counts differ between spaces")
    n = H.shape[0]
    if k < 1 or 2 * n - 3 * k - 1 <= 0:
        raise ManifoldError(f"k={k} too large for n={n}")

    dist_high = _distance_matrix(H, "euclidean")
    dist_low = _distance_matrix(L, "euclidean")
    penalty = 0.0
    for i in range(n):
        order_high = np.argsort(dist_high[i], kind="stable")
        order_high = order_high[order_high != i]
        rank_high = np.empty(n, dtype=int)
        rank_high[order_high] = np.arange(1, n)
        high_set = set(order_high[:k].tolist())
        order_low = np.argsort(dist_low[i], kind="stable")
        order_low = order_low[order_low != i][:k]
        for j in order_low:
            if int(j) not in high_set:
                penalty += rank_high[j] - k
    return 1.0 - 2.0 * penalty / (n * k * (2.0 * n - 3.0 * k - 1.0))
