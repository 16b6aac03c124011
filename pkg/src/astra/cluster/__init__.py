"""Clustering algorithms, validity metrics, composite scoring, and validation."""
from .algorithms import (
    AVERAGE,
    WARD,
    ClusterSolution,
    ReachabilityPlot,
    agglomerative,
    canonical_labels,
    cluster_density,
    cut_merge_sequence,
    dbscan,
    extract_xi_clusters,
    kdistance_curve,
    kmeans,
    knee_index,
    linkage_merge_sequence,
    optics,
    optics_reachability,
    pairwise_distances,
    select_epsilon_knee,
)
from .metrics import (
    DEGENERACY_SENTINEL,
    MetricError,
    QualityScores,
    adjusted_rand_index,
    calinski_harabasz_score,
    davies_bouldin_score,
    normalized_mutual_info,
    silhouette_score,
    validity_metrics,
)
from .scoring import (
    NOISE_FLAG_THRESHOLD,
    CompositeWeights,
    SweepCandidate,
    SweepConfig,
    SweepResult,
    composite_score,
    granularity_bonus,
    penalty_fractions,
    run_sweep,
)
from .validation import (
    GapCurve,
    SensitivityReport,
    StabilityReport,
    bootstrap_stability,
    gap_statistic,
    sample_bounded_dirichlet,
    weight_sensitivity,
)

__all__ = [
    "AVERAGE",
    "WARD",
    "ClusterSolution",
    "ReachabilityPlot",
    "agglomerative",
    "canonical_labels",
    "cluster_density",
    "cut_merge_sequence",
    "dbscan",
    "extract_xi_clusters",
    "kdistance_curve",
    "kmeans",
    "knee_index",
    "linkage_merge_sequence",
    "optics",
    "optics_reachability",
    "pairwise_distances",
    "select_epsilon_knee",
    "DEGENERACY_SENTINEL",
    "MetricError",
    "QualityScores",
    "adjusted_rand_index",
    "calinski_harabasz_score",
    "davies_bouldin_score",
    "normalized_mutual_info",
    "silhouette_score",
    "validity_metrics",
    "NOISE_FLAG_THRESHOLD",
    "CompositeWeights",
    "SweepCandidate",
    "SweepConfig",
    "SweepResult",
    "composite_score",
    "granularity_bonus",
    "penalty_fractions",
    "run_sweep",
    "GapCurve",
    "SensitivityReport",
    "StabilityReport",
    "bootstrap_stability",
    "gap_statistic",
    "sample_bounded_dirichlet",
    "weight_sensitivity",
]
