"""Composite scoring of sweep candidates and the hyperparameter sweep itself.

The composite blends min-max normalized validity indices with a granularity
bonus and degeneracy penalties:

    S = alpha*sil_hat + beta*ch_hat + gamma*db_hat + delta*b_k
        - lambda_singleton*p_singleton - lambda_small*p_small

Normalization pools every candidate from one sweep run so composite values
are comparable across algorithms. The Davies-Bouldin term is inverted during
normalization (lower raw DB is better).
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .algorithms import (
    AVERAGE,
    WARD,
    ClusterSolution,
    cluster_density,
    cut_merge_sequence,
    kmeans,
    linkage_merge_sequence,
)
from .metrics import MetricError, QualityScores, validity_metrics

log = logging.getLogger(__name__)

# Candidates with more noise than this are kept but flagged in the report.
NOISE_FLAG_THRESHOLD = 0.25


@dataclass(frozen=True)
class CompositeWeights:
    """Weights of the composite score, fixed ahead of any sweep."""

    alpha: float = 0.30
    beta: float = 0.25
    gamma: float = 0.20
    delta: float = 0.10
    lambda_singleton: float = 0.10
    lambda_small: float = 0.05
    eta: float = 0.02
    k_min: int = 5
    k_max: int = 12
    max_bonus: float = 0.14

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "delta", "lambda_singleton", "lambda_small"):
            if getattr(self, name) < 0:
                raise ValueError(f"weight {name} must be nonnegative")
        expected = self.eta * (self.k_max - self.k_min)
        if abs(self.max_bonus - expected) > 1e-12:
            raise ValueError(
                f"max_bonus {self.max_bonus} != eta*(k_max-k_min) = {expected}"
            )

    def blend(self) -> tuple[float, float, float, float, float, float]:
        return (
            self.alpha,
            self.beta,
            self.gamma,
            self.delta,
            self.lambda_singleton,
            self.lambda_small,
        )


def granularity_bonus(k: int, weights: CompositeWeights) -> float:
    """Linear ramp over [k_min, k_max], zero below, clamped above."""
    if k < weights.k_min:
        return 0.0
    return min(weights.eta * (k - weights.k_min), weights.max_bonus)


@dataclass(frozen=True)
class SweepCandidate:
    solution: ClusterSolution
    scores: QualityScores
    noise_flagged: bool = False


def _minmax(values: np.ndarray, invert: bool = False) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        warnings.warn("degenerate min-max range; normalized scores set to 1.0")
        return np.ones_like(values)
    if invert:
        return (hi - values) / (hi - lo)
    return (values - lo) / (hi - lo)


def penalty_fractions(solution: ClusterSolution) -> tuple[float, float]:
    """(p_singleton, p_small): shares of size-1 and size-<2 clusters."""
    if solution.k_effective == 0:
        return 0.0, 0.0
    sizes = np.array(solution.cluster_sizes)
    p_singleton = float((sizes == 1).sum() / solution.k_effective)
    p_small = float((sizes < 2).sum() / solution.k_effective)
    return p_singleton, p_small


def composite_score(
    candidates: Sequence[SweepCandidate],
    weights: CompositeWeights = CompositeWeights(),
) -> list[SweepCandidate]:
    """Score and rank candidates from one sweep run (descending composite).

    Ties break by higher raw silhouette, then smaller effective k.
    """
    if len(candidates) < 2:
        raise ValueError("composite normalization needs at least 2 candidates")
    sil = np.array([c.scores.silhouette for c in candidates])
    ch = np.array([c.scores.calinski_harabasz for c in candidates])
    db = np.array([c.scores.davies_bouldin for c in candidates])
    sil_hat = _minmax(sil)
    ch_hat = _minmax(ch)
    db_hat = _minmax(db, invert=True)

    scored: list[SweepCandidate] = []
    for i, cand in enumerate(candidates):
        k = cand.solution.k_effective
        p_singleton, p_small = penalty_fractions(cand.solution)
        a, b, g, d, l1, l2 = weights.blend()
        composite = (
            a * sil_hat[i]
            + b * ch_hat[i]
            + g * db_hat[i]
            + d * granularity_bonus(k, weights)
            - l1 * p_singleton
            - l2 * p_small
        )
        scored.append(
            replace(
                cand,
                scores=replace(
                    cand.scores,
                    sil_hat=float(sil_hat[i]),
                    ch_hat=float(ch_hat[i]),
                    db_hat=float(db_hat[i]),
                    composite=float(composite),
                ),
            )
        )
    scored.sort(
        key=lambda c: (
            -c.scores.composite,
            -c.scores.silhouette,
            c.solution.k_effective,
        )
    )
    return scored


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    k_values: tuple[int, ...] = tuple(range(2, 21))
    dbscan_min_samples: tuple[int, ...] = (3, 5, 10, 15)
    optics_min_samples: tuple[int, ...] = (3, 5, 10, 15)
    optics_xi: tuple[float, ...] = (0.01, 0.05, 0.1, 0.15)
    kmeans_seed: int = 0
    weights: CompositeWeights = field(default_factory=CompositeWeights)


@dataclass(frozen=True)
class SweepResult:
    ranked: list[SweepCandidate]
    excluded: list[tuple[ClusterSolution, str]]

    @property
    def best(self) -> SweepCandidate:
        return self.ranked[0]

    def best_per_algorithm(self) -> dict[str, SweepCandidate]:
        best: dict[str, SweepCandidate] = {}
        for cand in self.ranked:
            best.setdefault(cand.solution.algorithm, cand)
        return best

    def report_rows(self) -> list[dict[str, object]]:
        rows = []
        for cand in self.ranked:
            s = cand.scores
            rows.append(
                {
                    "algorithm": cand.solution.algorithm,
                    "params": cand.solution.params,
                    "k": cand.solution.k_effective,
                    "composite": s.composite,
                    "silhouette": s.silhouette,
                    "calinski_harabasz": s.calinski_harabasz,
                    "davies_bouldin": s.davies_bouldin,
                    "noise_pct": 100.0 * cand.solution.noise_fraction,
                    "noise_flagged": cand.noise_flagged,
                }
            )
        return rows

    def report_text(self) -> str:
        header = (
            f"{'algorithm':<24}{'k':>4}{'composite':>11}{'silhouette':>12}"
            f"{'CH':>14}{'DB':>11}{'noise%':>8}"
        )

        def fmt(value: float, width: int) -> str:
            if abs(value) >= 1e6:
                return f"{value:>{width}.3e}"
            return f"{value:>{width}.3f}"

        lines = [header, "-" * len(header)]
        for row in self.report_rows():
            flag = " *" if row["noise_flagged"] else ""
            lines.append(
                f"{row['algorithm']:<24}{row['k']:>4}{row['composite']:>11.4f}"
                f"{row['silhouette']:>12.4f}{fmt(row['calinski_harabasz'], 14)}"
                f"{fmt(row['davies_bouldin'], 11)}{row['noise_pct']:>8.1f}{flag}"
            )
        if self.excluded:
            lines.append("")
            lines.append("excluded candidates:")
            for sol, reason in self.excluded:
                lines.append(f"  {sol.algorithm} {sol.params}: {reason}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(
            {
                "ranked": self.report_rows(),
                "excluded": [
                    {"algorithm": sol.algorithm, "params": sol.params, "reason": reason}
                    for sol, reason in self.excluded
                ],
            },
            indent=2,
            sort_keys=True,
        )


def _candidate_solutions(
    points: np.ndarray, config: SweepConfig
) -> Iterable[ClusterSolution]:
    n = points.shape[0]
    k_values = [k for k in config.k_values if 2 <= k <= n]
    for linkage in (WARD, AVERAGE):
        merges = linkage_merge_sequence(points, linkage)
        for k in k_values:
            labels = cut_merge_sequence(merges, n, k)
            yield ClusterSolution.from_labels(
                f"agglomerative_{linkage}", {"linkage": linkage, "k": k}, labels
            )
    for k in k_values:
        yield kmeans(points, k, seed=config.kmeans_seed)
    for min_samples in config.dbscan_min_samples:
        if min_samples >= n:
            continue
        yield cluster_density(points, "dbscan", {"min_samples": min_samples})
    for min_samples in config.optics_min_samples:
        if min_samples > n or min_samples < 2:
            continue
        for xi in config.optics_xi:
            yield cluster_density(points, "optics", {"min_samples": min_samples, "xi": xi})


def run_sweep(points: np.ndarray, config: SweepConfig = SweepConfig()) -> SweepResult:
    """Run the full algorithm/parameter grid and rank by composite score."""
    candidates: list[SweepCandidate] = []
    excluded: list[tuple[ClusterSolution, str]] = []
    for solution in _candidate_solutions(points, config):
        if solution.k_effective < 2:
            excluded.append((solution, f"k_effective={solution.k_effective} < 2"))
            continue
        try:
            scores = validity_metrics(points, solution.labels)
        except MetricError as exc:
            excluded.append((solution, str(exc)))
            continue
        flagged = solution.noise_fraction > NOISE_FLAG_THRESHOLD
        if flagged:
            log.warning(
                "%s %s: noise fraction %.1f%% exceeds %.0f%%",
                solution.algorithm,
                solution.params,
                100 * solution.noise_fraction,
                100 * NOISE_FLAG_THRESHOLD,
            )
        candidates.append(SweepCandidate(solution, scores, noise_flagged=flagged))
    ranked = composite_score(candidates, config.weights)
    return SweepResult(ranked=ranked, excluded=excluded)
