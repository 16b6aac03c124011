"""Statistical validation of a clustering choice: gap statistic, bootstrap
stability, and global sensitivity of the composite weights."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .algorithms import (
    AVERAGE,
    ClusterSolution,
    cut_merge_sequence,
    linkage_merge_sequence,
)
from .metrics import adjusted_rand_index, normalized_mutual_info
from .scoring import CompositeWeights, SweepCandidate, granularity_bonus, penalty_fractions

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Gap statistic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GapCurve:
    k_values: tuple[int, ...]
    gap: np.ndarray
    s_k: np.ndarray
    log_wk: np.ndarray
    k_star: int


def _within_dispersion(points: np.ndarray, labels: np.ndarray) -> float:
    w = 0.0
    for c in np.unique(labels[labels >= 0]):
        member = points[labels == c]
        centroid = member.mean(axis=0)
        w += float(((member - centroid) ** 2).sum())
    return w


def _average_linkage_labels_per_k(
    points: np.ndarray, k_values: Sequence[int]
) -> dict[int, np.ndarray]:
    """Labels for every k from one agglomerative-Average merge sequence."""
    merges = linkage_merge_sequence(points, AVERAGE)
    n = points.shape[0]
    return {k: cut_merge_sequence(merges, n, k) for k in k_values}


def gap_statistic(
    points: np.ndarray,
    k_values: Sequence[int],
    n_refs: int = 20,
    seed: int = 0,
    clusterer: Callable[[np.ndarray, int], np.ndarray] | None = None,
) -> GapCurve:
    """Gap statistic over ``k_values`` with uniform bounding-box references.

    The default clusterer is the sweep's agglomerative-Average linkage (one
    merge sequence is reused for all k). k* is the smallest k with
    Gap(k) >= Gap(k+1) - s_{k+1}; if no k in range satisfies it, the largest
    candidate k is returned.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    k_values = tuple(sorted(k_values))
    if n_refs < 10:
        raise ValueError("gap statistic needs at least 10 reference resamples")
    if k_values[-1] > n:
        raise ValueError(f"k range exceeds n={n}")

    rng = np.random.default_rng(seed)
    lo, hi = points.min(axis=0), points.max(axis=0)
    refs = [rng.uniform(lo, hi, size=points.shape) for _ in range(n_refs)]

    if clusterer is None:
        def labels_per_k(data: np.ndarray) -> dict[int, np.ndarray]:
            return _average_linkage_labels_per_k(data, k_values)
    else:
        def labels_per_k(data: np.ndarray) -> dict[int, np.ndarray]:
            return {k: clusterer(data, k) for k in k_values}

    log_wk = np.zeros(len(k_values))
    ref_log_wk = np.zeros((n_refs, len(k_values)))
    data_labels = labels_per_k(points)
    ref_labels = [labels_per_k(ref) for ref in refs]
    for idx, k in enumerate(k_values):
        log_wk[idx] = np.log(max(_within_dispersion(points, data_labels[k]), 1e-300))
        for b in range(n_refs):
            ref_log_wk[b, idx] = np.log(
                max(_within_dispersion(refs[b], ref_labels[b][k]), 1e-300)
            )

    gap = ref_log_wk.mean(axis=0) - log_wk
    s_k = ref_log_wk.std(axis=0) * np.sqrt(1.0 + 1.0 / n_refs)

    k_star = k_values[-1]
    for idx in range(len(k_values) - 1):
        if gap[idx] >= gap[idx + 1] - s_k[idx + 1]:
            k_star = k_values[idx]
            break
    return GapCurve(k_values=k_values, gap=gap, s_k=s_k, log_wk=log_wk, k_star=k_star)


# ---------------------------------------------------------------------------
# Bootstrap stability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    ari_mean: float
    ari_std: float
    nmi_mean: float
    nmi_std: float
    n_completed: int
    n_skipped: int


def bootstrap_stability(
    points: np.ndarray,
    reference: ClusterSolution,
    recluster: Callable[[np.ndarray], np.ndarray],
    n_boot: int = 100,
    seed: int = 0,
) -> StabilityReport:
    """Resample rows with replacement, recluster, and compare to ``reference``.

    Agreement is computed on the distinct rows of each resample: the
    replicate label of a distinct row is matched against the reference label
    at that row's original index. Replicates with fewer distinct rows than
    the reference cluster count are skipped and counted.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    k_ref = reference.k_effective
    aris, nmis = [], []
    skipped = 0
    for _ in range(n_boot):
        sample = rng.integers(0, n, size=n)
        distinct = np.unique(sample)
        if distinct.shape[0] < k_ref:
            skipped += 1
            continue
        replicate_labels = recluster(points[distinct])
        ref_labels = reference.labels[distinct]
        aris.append(adjusted_rand_index(ref_labels, replicate_labels))
        nmis.append(normalized_mutual_info(ref_labels, replicate_labels))
    if not aris:
        raise ValueError("all bootstrap replicates were skipped")
    return StabilityReport(
        ari_mean=float(np.mean(aris)),
        ari_std=float(np.std(aris)),
        nmi_mean=float(np.mean(nmis)),
        nmi_std=float(np.std(nmis)),
        n_completed=len(aris),
        n_skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Composite-weight sensitivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityReport:
    win_rates: dict[tuple[str, int], float]
    n_samples: int
    bounds: tuple[float, float]

    def winner(self) -> tuple[str, int]:
        return max(self.win_rates.items(), key=lambda kv: kv[1])[0]


def sample_bounded_dirichlet(
    n_components: int,
    bounds: tuple[float, float],
    rng: np.random.Generator,
    max_tries: int = 100_000,
) -> np.ndarray:
    """One Dirichlet(1) draw, rejection-resampled until every component lies
    inside ``bounds``."""
    lo, hi = bounds
    if lo * n_components > 1.0 or hi * n_components < 1.0:
        raise ValueError(f"bounds {bounds} infeasible for {n_components} components")
    for _ in range(max_tries):
        draw = rng.dirichlet(np.ones(n_components))
        if np.all(draw >= lo) and np.all(draw <= hi):
            return draw
    raise RuntimeError("rejection sampling failed to find an in-bounds weight vector")


def weight_sensitivity(
    scored: Sequence[SweepCandidate],
    n_samples: int = 500,
    bounds: tuple[float, float] = (0.05, 0.50),
    seed: int = 0,
    base_weights: CompositeWeights = CompositeWeights(),
) -> SensitivityReport:
    """Re-rank precomputed candidates under Dirichlet-sampled blend weights.

    Each sample draws the six blend weights (three metric weights, the bonus
    weight, and the two penalty weights) from a Dirichlet constrained to
    ``bounds``; normalized metrics are reused from the base sweep. Reports
    the fraction of samples each (algorithm, k) candidate wins.
    """
    if not scored or scored[0].scores.composite is None:
        raise ValueError("weight sensitivity needs composite-scored candidates")
    rng = np.random.default_rng(seed)

    features = np.zeros((len(scored), 6))
    keys: list[tuple[str, int]] = []
    sil = np.zeros(len(scored))
    ks = np.zeros(len(scored), dtype=int)
    for i, cand in enumerate(scored):
        s = cand.scores
        p_singleton, p_small = penalty_fractions(cand.solution)
        k = cand.solution.k_effective
        features[i] = (
            s.sil_hat,
            s.ch_hat,
            s.db_hat,
            granularity_bonus(k, base_weights),
            -p_singleton,
            -p_small,
        )
        keys.append((cand.solution.algorithm, k))
        sil[i] = s.silhouette
        ks[i] = k

    wins = np.zeros(len(scored))
    for _ in range(n_samples):
        w = sample_bounded_dirichlet(6, bounds, rng)
        totals = features @ w
        order = sorted(
            range(len(scored)), key=lambda i: (-totals[i], -sil[i], ks[i])
        )
        wins[order[0]] += 1

    rates: dict[tuple[str, int], float] = {}
    for key, win in zip(keys, wins):
        rates[key] = rates.get(key, 0.0) + float(win) / n_samples
    return SensitivityReport(win_rates=rates, n_samples=n_samples, bounds=bounds)
