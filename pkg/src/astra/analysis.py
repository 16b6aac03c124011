"""Post-clustering analysis: similarity links, neighbor-cluster entropy
boundaries, K_nn sensitivity, leave-one-axis-out ablation, shuffle negative
controls, and the raw-vs-codebook comparison."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .cluster.algorithms import AVERAGE, agglomerative
from .cluster.metrics import calinski_harabasz_score, silhouette_score
from .cluster.scoring import SweepConfig, run_sweep
from .codebook import Codebook, FeatureMatrix, quantize_corpus
from .corpus import AxisId, Corpus
from .manifold import ManifoldConfig, umap_project

log = logging.getLogger(__name__)

BOUNDARY_THRESHOLD = 0.999

SHUFFLE_MODES = ("axis", "inter_institution", "token")


# ---------------------------------------------------------------------------
# Similarity links
# ---------------------------------------------------------------------------


def similarity_topk(
    features: FeatureMatrix, k_links: int = 5
) -> list[list[tuple[str, float]]]:
    """Per-institution top-k cosine neighbors (self excluded, ties by index)."""
    X = features.matrix
    n = X.shape[0]
    sims = X @ X.T
    k = min(k_links, n - 1)
    out: list[list[tuple[str, float]]] = []
    for i in range(n):
        order = np.lexsort((np.arange(n), -sims[i]))
        order = order[order != i][:k]
        out.append([(features.institution_ids[j], float(sims[i, j])) for j in order])
    return out


def _neighbor_indices(X: np.ndarray, k: int) -> np.ndarray:
    n = X.shape[0]
    sims = X @ X.T
    rows = np.zeros((n, k), dtype=int)
    for i in range(n):
        order = np.lexsort((np.arange(n), -sims[i]))
        rows[i] = order[order != i][:k]
    return rows


# ---------------------------------------------------------------------------
# Boundary entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryRow:
    institution_id: str
    entropy: float
    distribution: dict[int, float]
    distinct_clusters: int
    boundary: bool


@dataclass(frozen=True)
class BoundaryReport:
    rows: tuple[BoundaryRow, ...]
    k_nn: int

    def boundary_ids(self) -> list[str]:
        return [r.institution_id for r in self.rows if r.boundary]

    def entropy_of(self, institution_id: str) -> float:
        for r in self.rows:
            if r.institution_id == institution_id:
                return r.entropy
        raise KeyError(institution_id)


def normalized_entropy(proportions: Sequence[float]) -> float:
    """Shannon entropy of a cluster histogram normalized by log of its
    support size; 0 by convention when only one cluster is present."""
    p = np.asarray([q for q in proportions if q > 0], dtype=float)
    if p.shape[0] <= 1:
        return 0.0
    h = float(-(p * np.log(p)).sum() / np.log(p.shape[0]))
    return min(max(h, 0.0), 1.0)


def neighbor_entropy(
    features: FeatureMatrix, labels: np.ndarray, k_nn: int = 10
) -> BoundaryReport:
    """Neighbor-cluster entropy per institution over its top cosine neighbors."""
    X = features.matrix
    n = X.shape[0]
    if k_nn >= n:
        raise ValueError(f"k_nn={k_nn} must be smaller than n={n}")
    labels = np.asarray(labels, dtype=int)
    neighbors = _neighbor_indices(X, k_nn)
    rows: list[BoundaryRow] = []
    for i in range(n):
        neigh_labels = labels[neighbors[i]]
        values, counts = np.unique(neigh_labels, return_counts=True)
        dist = {int(v): float(c) / k_nn for v, c in zip(values, counts)}
        h = normalized_entropy(list(dist.values()))
        rows.append(
            BoundaryRow(
                institution_id=features.institution_ids[i],
                entropy=h,
                distribution=dist,
                distinct_clusters=len(values),
                boundary=h >= BOUNDARY_THRESHOLD,
            )
        )
    return BoundaryReport(rows=tuple(rows), k_nn=k_nn)


def knn_sensitivity(
    features: FeatureMatrix,
    labels: np.ndarray,
    k_set: Sequence[int] = (3, 5, 7, 10, 15, 20),
) -> "KnnSensitivity":
    """Boundary sets across K_nn values with their pairwise Jaccard overlap."""
    n = features.matrix.shape[0]
    usable = [k for k in k_set if k < n]
    skipped = [k for k in k_set if k >= n]
    if skipped:
        log.warning("K_nn values %s skipped (need K_nn < n=%d)", skipped, n)
    sets = {k: set(neighbor_entropy(features, labels, k).boundary_ids()) for k in usable}
    jaccard: dict[tuple[int, int], float] = {}
    for a in usable:
        for b in usable:
            if a >= b:
                continue
            union = sets[a] | sets[b]
            jaccard[(a, b)] = len(sets[a] & sets[b]) / len(union) if union else 1.0
    counts: dict[str, int] = {}
    for ids in sets.values():
        for i in ids:
            counts[i] = counts.get(i, 0) + 1
    stable = sorted(i for i, c in counts.items() if c >= len(usable) / 2)
    return KnnSensitivity(
        k_values=tuple(usable), boundary_sets=sets, jaccard=jaccard, stable_ids=tuple(stable)
    )


@dataclass(frozen=True)
class KnnSensitivity:
    k_values: tuple[int, ...]
    boundary_sets: dict[int, set[str]]
    jaccard: dict[tuple[int, int], float]
    stable_ids: tuple[str, ...]


# ---------------------------------------------------------------------------
# Leave-one-axis-out ablation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AblationResult:
    removed: str  # axis key or shuffle mode
    silhouette: float
    calinski_harabasz: float
    delta_silhouette: float
    delta_calinski_harabasz: float
    replicate_silhouettes: tuple[float, ...] = ()
    t_statistic: float | None = None
    p_value: float | None = None


@dataclass(frozen=True)
class AblationStudy:
    baseline_silhouette: float
    baseline_calinski_harabasz: float
    results: tuple[AblationResult, ...]


def _feature_space_scores(
    features: FeatureMatrix, labels: np.ndarray
) -> tuple[float, float]:
    return (
        silhouette_score(features.matrix, labels),
        calinski_harabasz_score(features.matrix, labels),
    )


def _cluster_features(
    features: FeatureMatrix,
    manifold_config: ManifoldConfig,
    linkage: str,
    k: int,
) -> np.ndarray:
    projection = umap_project(features.matrix, manifold_config)
    return agglomerative(projection.coordinates, linkage, k).labels


def leave_one_axis_out(
    corpus: Corpus,
    codebook: Codebook,
    manifold_config: ManifoldConfig,
    linkage: str,
    k: int,
    features: str = "tfidf",
) -> AblationStudy:
    """Remove each axis in turn, re-run projection + clustering with
    identical settings, and report feature-space silhouette/CH deltas.

    Positive delta means removing the axis decreased quality.
    """
    baseline_features = quantize_corpus(corpus, codebook, features=features)
    baseline_labels = _cluster_features(baseline_features, manifold_config, linkage, k)
    base_sil, base_ch = _feature_space_scores(baseline_features, baseline_labels)

    results: list[AblationResult] = []
    for removed in AxisId:
        axes = tuple(a for a in AxisId if a != removed)
        reduced = quantize_corpus(corpus, codebook, features=features, axes=axes)
        labels = _cluster_features(reduced, manifold_config, linkage, k)
        sil, ch = _feature_space_scores(reduced, labels)
        results.append(
            AblationResult(
                removed=removed.key,
                silhouette=sil,
                calinski_harabasz=ch,
                delta_silhouette=base_sil - sil,
                delta_calinski_harabasz=base_ch - ch,
            )
        )
    return AblationStudy(
        baseline_silhouette=base_sil,
        baseline_calinski_harabasz=base_ch,
        results=tuple(results),
    )


# ---------------------------------------------------------------------------
# Shuffle negative controls
# ---------------------------------------------------------------------------


def shuffle_token_lists(
    corpus: Corpus, mode: str, rng: np.random.Generator
) -> dict[str, tuple[list[str], ...]]:
    """One shuffled replicate of the corpus token lists.

    axis: each institution's eight token lists are randomly re-assigned to
    axes. inter_institution: within each axis, token lists move between
    institutions. token: within each axis, the pooled tokens of all
    institutions are permuted and redistributed, preserving per-institution
    lengths (a within-description permutation would be a no-op because
    quantization is order-invariant).
    """
    if mode not in SHUFFLE_MODES:
        raise ValueError(f"unknown shuffle mode {mode!r}; expected {SHUFFLE_MODES}")
    lists = {inst.id: [list(t) for t in inst.tokens()] for inst in corpus}
    ids = list(lists)
    if mode == "axis":
        for inst_id in ids:
            perm = rng.permutation(len(AxisId))
            lists[inst_id] = [lists[inst_id][p] for p in perm]
    elif mode == "inter_institution":
        for axis in AxisId:
            perm = rng.permutation(len(ids))
            moved = [lists[ids[p]][axis] for p in perm]
            for inst_id, tokens in zip(ids, moved):
                lists[inst_id][axis] = tokens
    else:
        for axis in AxisId:
            pooled = [t for inst_id in ids for t in lists[inst_id][axis]]
            pooled = [pooled[p] for p in rng.permutation(len(pooled))]
            cursor = 0
            for inst_id in ids:
                length = len(lists[inst_id][axis])
                lists[inst_id][axis] = pooled[cursor : cursor + length]
                cursor += length
    return {inst_id: tuple(axis_tokens) for inst_id, axis_tokens in lists.items()}


def shuffle_controls(
    corpus: Corpus,
    codebook: Codebook,
    mode: str,
    k: int,
    n_reps: int = 100,
    seed: int = 0,
    features: str = "tfidf",
    linkage: str = AVERAGE,
) -> AblationResult:
    """Negative control: shuffle the corpus, rebuild features, recluster in
    feature space, and compare silhouettes against the unshuffled baseline.

    The baseline pipeline is deterministic, so the Welch t-test compares the
    constant baseline (replicated to the replicate count) against the
    shuffled silhouette sample.
    """
    baseline_features = quantize_corpus(corpus, codebook, features=features)
    baseline_labels = agglomerative(baseline_features.matrix, linkage, k).labels
    base_sil = silhouette_score(baseline_features.matrix, baseline_labels)
    base_ch = calinski_harabasz_score(baseline_features.matrix, baseline_labels)

    rng = np.random.default_rng(seed)
    sils: list[float] = []
    for _ in range(n_reps):
        shuffled = shuffle_token_lists(corpus, mode, rng)
        feats = quantize_corpus(corpus, codebook, features=features, token_lists=shuffled)
        labels = agglomerative(feats.matrix, linkage, k).labels
        sils.append(silhouette_score(feats.matrix, labels))
    sample = np.array(sils)
    with warnings.catch_warnings():
        # the baseline sample is constant by construction (deterministic
        # pipeline), which scipy flags as a precision concern
        warnings.simplefilter("ignore", RuntimeWarning)
        t_stat, p_value = stats.ttest_ind(
            np.full(n_reps, base_sil), sample, equal_var=False
        )
    return AblationResult(
        removed=mode,
        silhouette=float(sample.mean()),
        calinski_harabasz=float("nan"),
        delta_silhouette=base_sil - float(sample.mean()),
        delta_calinski_harabasz=float("nan"),
        replicate_silhouettes=tuple(float(s) for s in sils),
        t_statistic=float(t_stat),
        p_value=float(p_value),
    )


# ---------------------------------------------------------------------------
# Raw-embedding vs codebook comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathMetrics:
    silhouette: float
    calinski_harabasz: float
    davies_bouldin: float
    algorithm: str
    k: int


@dataclass(frozen=True)
class AblationComparison:
    codebook_path: PathMetrics
    raw_path: PathMetrics


def _sweep_path(matrix: np.ndarray, manifold_config: ManifoldConfig, k_values) -> PathMetrics:
    projection = umap_project(matrix, manifold_config)
    config = SweepConfig(
        k_values=tuple(k_values),
        dbscan_min_samples=(),
        optics_min_samples=(),
    )
    best = run_sweep(projection.coordinates, config).best
    return PathMetrics(
        silhouette=best.scores.silhouette,
        calinski_harabasz=best.scores.calinski_harabasz,
        davies_bouldin=best.scores.davies_bouldin,
        algorithm=best.solution.algorithm,
        k=best.solution.k_effective,
    )


def raw_vs_codebook_ablation(
    codebook_features: np.ndarray,
    raw_concatenated: np.ndarray,
    manifold_config: ManifoldConfig,
    k_values: Sequence[int] = tuple(range(2, 21)),
) -> AblationComparison:
    """Run matched agglomerative sweeps over the codebook-feature path and
    the concatenated raw-embedding path; report both sides' metrics."""
    return AblationComparison(
        codebook_path=_sweep_path(codebook_features, manifold_config, k_values),
        raw_path=_sweep_path(raw_concatenated, manifold_config, k_values),
    )
