import numpy as np
import pytest

from astra.cluster import (
    agglomerative,
    cluster_density,
    dbscan,
    kdistance_curve,
    kmeans,
    knee_index,
    optics,
    optics_reachability,
    select_epsilon_knee,
)
from oracles import (
    best_kmeans_assignment,
    best_two_partition_by_sse,
    dbscan_bf,
    partition_sets,
)


def two_blobs(seed=0, n=3, spread=0.1, gap=10.0):
    rng = np.random.default_rng(seed)
    a = rng.normal((0, 0), spread, size=(n, 2))
    b = rng.normal((gap, gap), spread, size=(n, 2))
    return np.vstack([a, b])


class TestAgglomerative:
    @pytest.mark.parametrize("linkage", ["ward", "average"])
    def test_two_far_blobs_match_bruteforce(self, linkage):
        points = two_blobs()
        sol = agglomerative(points, linkage, 2)
        oracle = {frozenset(g) for g in best_two_partition_by_sse(points)}
        assert partition_sets(sol.labels) == oracle

    def test_k_equals_n_all_singletons(self):
        points = two_blobs()
        sol = agglomerative(points, "average", 6)
        assert sol.k_effective == 6
        assert sol.cluster_sizes == (1,) * 6

    def test_equidistant_tie_break_merges_first_pair(self):
        # distances d(0,1) = d(0,2) = 5 exactly; tie resolves to pair (0, 1)
        points = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, -4.0]])
        for linkage in ("ward", "average"):
            sol = agglomerative(points, linkage, 2)
            assert sol.labels[0] == sol.labels[1] != sol.labels[2]

    def test_k_out_of_range(self):
        points = two_blobs()
        with pytest.raises(ValueError):
            agglomerative(points, "average", 1)
        with pytest.raises(ValueError):
            agglomerative(points, "average", 7)

    def test_labels_by_first_occurrence(self):
        points = two_blobs()
        sol = agglomerative(points, "ward", 2)
        assert sol.labels[0] == 0


class TestKMeans:
    def test_two_antipodal_vectors(self):
        points = np.array([[1.0, 0.0], [-1.0, 0.0]])
        sol = kmeans(points, 2, seed=0)
        assert sol.cluster_sizes == (1, 1)

    def test_two_angular_pairs_match_bruteforce(self):
        points = np.array(
            [[1.0, 0.02], [1.0, -0.02], [0.02, 1.0], [-0.02, 1.0]]
        )
        sol = kmeans(points, 2, seed=3)
        oracle = best_kmeans_assignment(points, 2)
        assert partition_sets(sol.labels) == partition_sets(oracle)

    def test_seed_determinism(self):
        rng = np.random.default_rng(1)
        points = rng.normal(size=(30, 3))
        a = kmeans(points, 4, seed=7)
        b = kmeans(points, 4, seed=7)
        assert np.array_equal(a.labels, b.labels)

    def test_identical_points_degenerate_flag(self):
        points = np.ones((5, 2))
        sol = kmeans(points, 3, seed=0)
        assert sol.degenerate
        assert len(sol.labels) == 5


class TestKneeSelection:
    def test_two_segment_curve_knee_at_joint(self):
        # flat segment then steep segment; joint at index 5
        curve = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 5.0, 9.0, 13.0])
        flat_then_steep = np.concatenate([np.ones(6), 1 + 4 * np.arange(1, 4.0)])
        assert np.array_equal(curve, flat_then_steep)
        assert knee_index(curve) == 5

    def test_kdistance_curve_sorted(self):
        points = two_blobs(n=10)
        curve = kdistance_curve(points, 3)
        assert np.all(np.diff(curve) >= 0)

    def test_epsilon_positive(self):
        assert select_epsilon_knee(two_blobs(n=10), 3) > 0


class TestDBSCAN:
    def test_blobs_plus_outliers_match_direct_reachability(self):
        rng = np.random.default_rng(5)
        dense_a = rng.normal((0, 0), 0.2, size=(12, 2))
        dense_b = rng.normal((8, 8), 0.2, size=(12, 2))
        outliers = np.array([[4.0, -6.0], [14.0, 2.0], [-6.0, 12.0]])
        points = np.vstack([dense_a, dense_b, outliers])
        sol = dbscan(points, eps=0.8, min_samples=4)
        oracle = dbscan_bf(points, 0.8, 4)
        assert sol.k_effective == 2
        assert np.sum(sol.labels == -1) == 3
        assert partition_sets([l for l in sol.labels if l >= 0] ) == partition_sets(
            [l for l in oracle if l >= 0]
        )
        assert np.array_equal(sol.labels == -1, np.array(oracle) == -1)

    def test_grid_below_spacing_all_noise(self):
        xx, yy = np.meshgrid(np.arange(5.0), np.arange(5.0))
        grid = np.column_stack([xx.ravel(), yy.ravel()])
        sol = dbscan(grid, eps=0.5, min_samples=3)
        assert sol.k_effective == 0
        assert sol.noise_fraction == 1.0

    def test_density_dispatch_knee(self):
        points = two_blobs(n=12, spread=0.15)
        sol = cluster_density(points, "dbscan", {"min_samples": 3})
        assert sol.k_effective == 2
        assert sol.params["min_samples"] == 3


class TestOPTICS:
    def test_reachability_ordering_covers_all(self):
        points = two_blobs(n=10)
        plot = optics_reachability(points, 5)
        assert sorted(plot.ordering.tolist()) == list(range(20))
        assert np.isinf(plot.reachability[0])

    def test_two_blobs_extracted(self):
        points = two_blobs(n=15, spread=0.2)
        sol = optics(points, min_samples=5, xi=0.05)
        assert sol.k_effective == 2
        non_noise = sol.labels >= 0
        truth = (np.arange(30) >= 15).astype(int)
        for c in range(2):
            members = truth[(sol.labels == c)]
            assert len(set(members.tolist())) == 1

    def test_blobs_intact_with_outliers_between(self):
        rng = np.random.default_rng(5)
        a = rng.normal((0, 0), 0.2, size=(15, 2))
        b = rng.normal((8, 8), 0.2, size=(15, 2))
        out = np.array([[4.0, -5.0], [13.0, 1.0], [-5.0, 12.0]])
        sol = optics(np.vstack([a, b, out]), min_samples=5, xi=0.05)
        assert sol.k_effective == 2
        # each blob lands wholly inside one cluster
        assert len(set(sol.labels[:15].tolist())) == 1
        assert len(set(sol.labels[15:30].tolist())) == 1
        assert sol.labels[0] != sol.labels[15]

    def test_deterministic(self):
        points = two_blobs(n=12, seed=9)
        a = optics(points, 5, 0.05)
        b = optics(points, 5, 0.05)
        assert np.array_equal(a.labels, b.labels)


class TestClusterSolutionInvariants:
    def test_sizes_plus_noise_sum_to_n(self):
        points = two_blobs(n=12, spread=0.3)
        for sol in (
            agglomerative(points, "ward", 3),
            kmeans(points, 3, seed=0),
            cluster_density(points, "dbscan", {"min_samples": 3}),
            optics(points, 4, 0.05),
        ):
            assert sum(sol.cluster_sizes) + int(sol.noise_fraction * len(sol.labels)) == len(
                sol.labels
            )
            assert sol.k_effective == len(sol.cluster_sizes)
