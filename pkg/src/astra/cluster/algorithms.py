"""Clustering algorithms used by the hyperparameter sweep.

All four algorithms are implemented here rather than wrapped from a library
because the sweep requires strict determinism: tie-breaks, label numbering,
and RNG use are all pinned so that identical inputs produce identical
solutions byte for byte.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

WARD = "ward"
AVERAGE = "average"

_LINKAGES = (WARD, AVERAGE)


@dataclass(frozen=True)
class ClusterSolution:
    """One clustering outcome: labels plus bookkeeping used by the scorer.

    ``labels`` uses -1 for noise points; non-noise labels are renumbered by
    first occurrence so equal partitions always carry equal label arrays.
    """

    algorithm: str
    params: dict[str, Any]
    labels: np.ndarray
    k_effective: int
    cluster_sizes: tuple[int, ...]
    noise_fraction: float
    degenerate: bool = False

    @classmethod
    def from_labels(
        cls,
        algorithm: str,
        params: dict[str, Any],
        labels: np.ndarray,
        degenerate: bool = False,
    ) -> "ClusterSolution":
        labels = canonical_labels(np.asarray(labels, dtype=int))
        n = labels.shape[0]
        noise = int(np.sum(labels < 0))
        k_eff = int(labels.max()) + 1 if np.any(labels >= 0) else 0
        sizes = tuple(int(np.sum(labels == c)) for c in range(k_eff))
        return cls(
            algorithm=algorithm,
            params=dict(params),
            labels=labels,
            k_effective=k_eff,
            cluster_sizes=sizes,
            noise_fraction=noise / n if n else 0.0,
            degenerate=degenerate,
        )


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber non-noise labels by order of first occurrence; noise stays -1."""
    out = np.full(labels.shape[0], -1, dtype=int)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels):
        if lab < 0:
            continue
        if lab not in mapping:
            mapping[int(lab)] = len(mapping)
        out[i] = mapping[int(lab)]
    return out


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Dense Euclidean distance matrix (exact, O(n^2))."""
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


# ---------------------------------------------------------------------------
# Agglomerative clustering (Lance-Williams)
# ---------------------------------------------------------------------------


def linkage_merge_sequence(
    points: np.ndarray, linkage: str = AVERAGE
) -> list[tuple[int, int]]:
    """Full merge sequence for agglomerative clustering.

    Clusters are identified by the smallest original point index among their
    members; each merge records ``(i, j)`` with ``i < j`` and the merged
    cluster keeps id ``i``. Ties on the merge criterion are broken by the
    lexicographically smallest ``(i, j)`` pair, which makes the sequence
    fully deterministic. Distances follow the Lance-Williams updates:
    Average linkage operates on plain Euclidean distances, Ward on squared
    distances (merge order is unchanged by the monotone square).
    """
    if linkage not in _LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; expected one of {_LINKAGES}")
    n = points.shape[0]
    if n < 2:
        return []
    work = pairwise_distances(points)
    if linkage == WARD:
        work = work**2
    np.fill_diagonal(work, np.inf)
    sizes = np.ones(n)
    alive = np.ones(n, dtype=bool)
    merges: list[tuple[int, int]] = []

    for _ in range(n - 1):
        ids = np.where(alive)[0]
        block = work[np.ix_(ids, ids)]
        minval = block.min()
        rows, cols = np.where(block == minval)
        pairs = [(ids[r], ids[c]) for r, c in zip(rows, cols) if ids[r] < ids[c]]
        i, j = min(pairs)
        others = ids[(ids != i) & (ids != j)]
        if others.size:
            if linkage == AVERAGE:
                work[i, others] = (
                    sizes[i] * work[i, others] + sizes[j] * work[j, others]
                ) / (sizes[i] + sizes[j])
            else:
                total = sizes[i] + sizes[j] + sizes[others]
                work[i, others] = (
                    (sizes[i] + sizes[others]) * work[i, others]
                    + (sizes[j] + sizes[others]) * work[j, others]
                    - sizes[others] * work[i, j]
                ) / total
            work[others, i] = work[i, others]
        sizes[i] += sizes[j]
        alive[j] = False
        work[j, :] = np.inf
        work[:, j] = np.inf
        merges.append((int(i), int(j)))
    return merges


def cut_merge_sequence(merges: Sequence[tuple[int, int]], n: int, k: int) -> np.ndarray:
    """Labels after applying the first ``n - k`` merges."""
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    comp = np.arange(n)
    for i, j in merges[: n - k]:
        comp[comp == j] = i
    return canonical_labels(comp)


def agglomerative(points: np.ndarray, linkage: str, k: int) -> ClusterSolution:
    """Agglomerative clustering cut at ``k`` clusters."""
    n = points.shape[0]
    if not 2 <= k <= n:
        raise ValueError(f"k={k} out of range [2, {n}]")
    merges = linkage_merge_sequence(points, linkage)
    labels = cut_merge_sequence(merges, n, k)
    return ClusterSolution.from_labels(
        f"agglomerative_{linkage}", {"linkage": linkage, "k": k}, labels
    )


# ---------------------------------------------------------------------------
# Spherical k-means
# ---------------------------------------------------------------------------


def _normalize_rows(points: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return points / safe


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterSolution:
    """Spherical k-means: rows are L2-normalized, then Lloyd iterations with
    k-means++ seeding. Empty clusters are re-seeded from the point farthest
    from its assigned centroid.
    """
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    X = _normalize_rows(np.asarray(points, dtype=float))
    rng = np.random.default_rng(seed)
    degenerate = np.unique(X, axis=0).shape[0] < k

    centroids = _kmeanspp(X, k, rng)
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), labels]
        # re-seed empty clusters from the farthest points; stealing a
        # singleton's member can cascade, so repeat until all are filled
        for _ in range(k):
            empties = [c for c in range(k) if not np.any(labels == c)]
            if not empties:
                break
            degenerate = True
            for c in empties:
                far = int(np.argmax(point_d2))
                centroids[c] = X[far]
                labels[far] = c
                point_d2[far] = -np.inf
        new_centroids = centroids.copy()
        for c in range(k):
            members = X[labels == c]
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 1e-12:
                new_centroids[c] = mean / norm
        shift = np.max(np.linalg.norm(new_centroids - centroids, axis=1))
        centroids = new_centroids
        if shift < tol:
            break
    return ClusterSolution.from_labels(
        "kmeans", {"k": k, "seed": seed}, labels, degenerate=degenerate
    )


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[c] = X[rng.integers(n)]
            continue
        centroids[c] = X[rng.choice(n, p=closest / total)]
        d2 = ((X - centroids[c]) ** 2).sum(axis=1)
        closest = np.minimum(closest, d2)
    return centroids


# ---------------------------------------------------------------------------
# Density clustering: DBSCAN and OPTICS
# ---------------------------------------------------------------------------


def kdistance_curve(points: np.ndarray, k: int) -> np.ndarray:
    """Ascending-sorted distances to each point's k-th nearest neighbor."""
    n = points.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} out of range [1, {n - 1}]")
    dist = pairwise_distances(points)
    np.fill_diagonal(dist, np.inf)
    kdist = np.sort(dist, axis=1)[:, k - 1]
    return np.sort(kdist)


def knee_index(curve: np.ndarray) -> int:
    """Index of maximum perpendicular distance to the chord between the
    curve's endpoints (in index/value coordinates)."""
    n = curve.shape[0]
    if n < 3:
        return 0
    x = np.arange(n, dtype=float)
    dx, dy = x[-1] - x[0], curve[-1] - curve[0]
    length = np.hypot(dx, dy)
    if length == 0:
        return 0
    perp = np.abs(dx * (curve - curve[0]) - dy * (x - x[0])) / length
    return int(np.argmax(perp))


def select_epsilon_knee(points: np.ndarray, min_samples: int) -> float:
    """DBSCAN epsilon from the knee of the sorted k-distance curve."""
    curve = kdistance_curve(points, min_samples)
    return float(curve[knee_index(curve)])


def dbscan(points: np.ndarray, eps: float, min_samples: int) -> ClusterSolution:
    """Classic DBSCAN; neighborhoods include the point itself. Expansion
    visits points in index order, so labels are deterministic."""
    n = points.shape[0]
    dist = pairwise_distances(points)
    neighbors = [np.where(dist[i] <= eps)[0] for i in range(n)]
    core = np.array([len(nb) >= min_samples for nb in neighbors])

    UNVISITED = -2
    labels = np.full(n, UNVISITED, dtype=int)
    cluster_id = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if not core[i]:
            labels[i] = -1
            continue
        labels[i] = cluster_id
        queue = deque(int(q) for q in neighbors[i])
        while queue:
            q = queue.popleft()
            if labels[q] == -1:
                labels[q] = cluster_id
            if labels[q] != UNVISITED:
                continue
            labels[q] = cluster_id
            if core[q]:
                queue.extend(int(r) for r in neighbors[q])
        cluster_id += 1
    return ClusterSolution.from_labels(
        "dbscan", {"eps": eps, "min_samples": min_samples}, labels
    )


@dataclass(frozen=True)
class ReachabilityPlot:
    """OPTICS output: visit order, reachability in visit order, core distances."""

    ordering: np.ndarray
    reachability: np.ndarray
    core_distance: np.ndarray


def optics_reachability(points: np.ndarray, min_samples: int) -> ReachabilityPlot:
    """OPTICS reachability ordering with eps = infinity.

    Core distance is the distance to the ``min_samples``-th closest point,
    counting the point itself. Seed-queue ties resolve by point index.
    """
    n = points.shape[0]
    if not 2 <= min_samples <= n:
        raise ValueError(f"min_samples={min_samples} out of range [2, {n}]")
    dist = pairwise_distances(points)
    core_dist = np.sort(dist, axis=1)[:, min_samples - 1]

    processed = np.zeros(n, dtype=bool)
    reach = np.full(n, np.inf)
    ordering: list[int] = []

    def update_seeds(p: int, heap: list[tuple[float, int]]) -> None:
        for o in np.where(~processed)[0]:
            new_reach = max(core_dist[p], dist[p, o])
            if new_reach < reach[o]:
                reach[o] = new_reach
                heapq.heappush(heap, (new_reach, int(o)))

    for start in range(n):
        if processed[start]:
            continue
        processed[start] = True
        ordering.append(start)
        heap: list[tuple[float, int]] = []
        update_seeds(start, heap)
        while heap:
            r, q = heapq.heappop(heap)
            if processed[q] or r > reach[q]:
                continue
            processed[q] = True
            ordering.append(q)
            update_seeds(q, heap)

    order = np.array(ordering, dtype=int)
    return ReachabilityPlot(
        ordering=order, reachability=reach[order], core_distance=core_dist
    )


def _extend_region(
    steep: np.ndarray, monotone: np.ndarray, start: int, min_samples: int
) -> int:
    """Extend a steep region from ``start``, tolerating up to ``min_samples``
    consecutive non-steep (but monotone) points."""
    n = steep.shape[0]
    non_steep = 0
    end = start
    index = start
    while index < n - 1:
        index += 1
        if steep[index]:
            non_steep = 0
            end = index
        elif monotone[index]:
            non_steep += 1
            if non_steep > min_samples:
                break
        else:
            break
    return end


def extract_xi_clusters(
    reachability: np.ndarray, xi: float, min_samples: int
) -> list[tuple[int, int]]:
    """Xi-cluster extraction over a reachability plot (ordering-space intervals).

    Follows the steep-down/steep-up area pairing of the original OPTICS
    cluster extraction, without predecessor correction. Returned intervals
    are inclusive and ordered inner-before-outer where nested.
    """
    comp = 1.0 - xi
    r = np.hstack([reachability, [np.inf]])
    n = r.shape[0]
    with np.errstate(invalid="ignore"):
        steep_down = r[:-1] * comp >= r[1:]
        steep_up = r[:-1] <= r[1:] * comp
        down = r[:-1] >= r[1:]
        up = r[:-1] <= r[1:]

    clusters: list[tuple[int, int]] = []
    sdas: list[dict[str, float | int]] = []
    index = 0
    mib = 0.0
    min_cluster_size = max(2, min_samples)

    def filter_sdas(mib_val: float) -> list[dict[str, float | int]]:
        if np.isinf(mib_val):
            return []
        kept = [s for s in sdas if mib_val <= r[int(s["start"])] * comp]
        for s in kept:
            s["mib"] = max(float(s["mib"]), mib_val)
        return kept

    while index < n - 1:
        mib = max(mib, r[index])
        if steep_down[index]:
            sdas = filter_sdas(mib)
            start = index
            end = _extend_region(steep_down, down, start, min_samples)
            sdas.append({"start": start, "end": end, "mib": 0.0})
            index = end + 1
            mib = r[index] if index < n else np.inf
        elif steep_up[index]:
            sdas = filter_sdas(mib)
            u_start = index
            u_end = _extend_region(steep_up, up, u_start, min_samples)
            index = u_end + 1
            mib = r[index] if index < n else np.inf
            new_clusters: list[tuple[int, int]] = []
            for sda in sdas:
                c_start, c_end = int(sda["start"]), u_end
                d_max = r[int(sda["start"])]
                if c_end + 1 >= n:
                    continue
                if r[c_end + 1] * comp < float(sda["mib"]):
                    continue
                if d_max * comp >= r[c_end + 1]:
                    while c_start < int(sda["end"]) and r[c_start + 1] > r[c_end + 1]:
                        c_start += 1
                elif r[c_end + 1] * comp >= d_max:
                    while c_end > u_start and r[c_end] > d_max:
                        c_end -= 1
                if c_end - c_start + 1 < min_cluster_size:
                    continue
                if c_start > int(sda["end"]):
                    continue
                if c_end < u_start:
                    continue
                new_clusters.append((c_start, c_end))
            clusters.extend(reversed(new_clusters))
        else:
            index += 1
    return clusters


def optics(points: np.ndarray, min_samples: int, xi: float) -> ClusterSolution:
    """OPTICS with xi-cluster extraction; unclustered points are noise."""
    plot = optics_reachability(points, min_samples)
    intervals = extract_xi_clusters(plot.reachability, xi, min_samples)
    n = points.shape[0]
    in_order = np.full(n, -1, dtype=int)
    label = 0
    for s, e in intervals:
        e = min(e, n - 1)
        if np.all(in_order[s : e + 1] == -1):
            in_order[s : e + 1] = label
            label += 1
    labels = np.full(n, -1, dtype=int)
    labels[plot.ordering] = in_order
    return ClusterSolution.from_labels(
        "optics", {"min_samples": min_samples, "xi": xi}, labels
    )


def cluster_density(
    points: np.ndarray, algo: str, params: dict[str, Any]
) -> ClusterSolution:
    """Density clustering dispatch: DBSCAN selects eps via the k-distance
    knee unless given explicitly; OPTICS runs xi extraction."""
    if algo == "dbscan":
        min_samples = int(params["min_samples"])
        eps = params.get("eps")
        if eps is None:
            eps = select_epsilon_knee(points, min_samples)
        return dbscan(points, float(eps), min_samples)
    if algo == "optics":
        return optics(points, int(params["min_samples"]), float(params["xi"]))
    raise ValueError(f"unknown density algorithm {algo!r}")
