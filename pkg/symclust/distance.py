# third party
import numpy as np
from scipy.spatial import cKDTree

# first party
from exceptions import DegenerateCluster

INITIAL_CANDIDATES = 8
# relative slack on the stopping bound; tree and direct norms differ by a few ulps
BOUND_SLACK = 1e-9
# query/candidate pairs evaluated at once
QUERY_PAIRS = 1 << 16


def _ratios(offset: np.ndarray, partners: np.ndarray) -> np.ndarray:
    """||(x-c)+(y-c)|| / (||x-c|| + ||y-c||), clipped to [0, 1]."""
    numerator = np.linalg.norm(offset + partners, axis=-1)
    denominator = np.linalg.norm(offset, axis=-1) + np.linalg.norm(partners, axis=-1)
    return np.minimum(numerator / denominator, 1.0)


def point_symmetry_distance(x, c, cluster_points) -> float:
    """
    Point-symmetry distance of ``x`` about center ``c`` within a cluster.

    Exhaustive reference implementation: the minimum over every other member
    y of ||(x-c)+(y-c)|| / (||x-c|| + ||y-c||). A cluster with fewer than two
    points yields 1.0; x == c yields 0.
    """
    points = np.asarray(cluster_points, dtype=np.float64)
    if points.size == 0:
        raise DegenerateCluster("cluster has no points")
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    points = points.reshape(-1, x.shape[0])
    if len(points) < 2:
        return 1.0
    if np.array_equal(x, c):
        return 0.0
    own = np.flatnonzero(np.all(points == x, axis=1))
    if own.size:
        points = np.delete(points, own[0], axis=0)
    return float(_ratios(x - c, points - c).min())


def symmetry_distances(queries: np.ndarray, center: np.ndarray, members: np.ndarray) -> np.ndarray:
    """
    d_ps of many query points about one cluster, via a KD-tree over the members.

    The numerator ||(x-c)+(y-c)|| is the distance from y to the reflected
    point 2c-x, so candidates come from a nearest-neighbour query around it.
    Every unseen member y has a numerator of at least d_m, the m-th neighbour
    distance, and of at least |s - r| where r = ||x-c|| and s = ||y-c|| <= S,
    the cluster radius. The ratio bound max(d_m, |s - r|) / (r + s) falls until
    s = r + d_m and rises after, so its minimum over s in [0, S] sits at
    s = min(S, r + d_m). Queries whose best candidate beats that bound are
    final; the rest are re-queried with four times as many candidates until
    the member set is exhausted.

    Queries run in blocks of at most QUERY_PAIRS query/candidate pairs, so
    peak memory stays O(QUERY_PAIRS) whatever the cluster size.

    Including a query's own copy among the members is harmless: it scores
    exactly 1.0, the upper bound of every ratio.
    """
    members = np.asarray(members, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    center = np.asarray(center, dtype=np.float64)
    n_members = len(members)
    if n_members == 0:
        raise DegenerateCluster("cluster has no points")

    result = np.ones(len(queries), dtype=np.float64)
    if n_members < 2 or len(queries) == 0:
        return result

    offsets = queries - center
    radii = np.linalg.norm(offsets, axis=1)
    result[np.all(offsets == 0.0, axis=1)] = 0.0
    pending = np.flatnonzero(np.any(offsets != 0.0, axis=1))

    partners = members - center
    cluster_radius = float(np.linalg.norm(partners, axis=1).max())
    tree = cKDTree(members)
    m = min(INITIAL_CANDIDATES, n_members)
    while pending.size:
        best = np.empty(len(pending), dtype=np.float64)
        reach = np.empty(len(pending), dtype=np.float64)
        step = max(1, QUERY_PAIRS // m)
        for start in range(0, len(pending), step):
            block = pending[start : start + step]
            dist, idx = tree.query(center - offsets[block], k=m)
            dist = dist.reshape(len(block), m)
            idx = idx.reshape(len(block), m)
            best[start : start + step] = _ratios(offsets[block][:, None, :], partners[idx]).min(axis=1)
            reach[start : start + step] = dist[:, -1]
        if m == n_members:
            result[pending] = best
            break
        r = radii[pending]
        nearest_radius = np.minimum(cluster_radius, r + reach)
        bound = np.maximum(reach, np.abs(nearest_radius - r)) / (r + nearest_radius)
        settled = best <= bound * (1.0 - BOUND_SLACK)
        result[pending[settled]] = best[settled]
        pending = pending[~settled]
        m = min(m * 4, n_members)
    return result


def symmetry_distance_matrix(points: np.ndarray, centers: np.ndarray, assignments: np.ndarray) -> np.ndarray:
    """(n, K) matrix of d_ps of every point about every cluster's center and members."""
    points = np.asarray(points, dtype=np.float64)
    out = np.empty((len(points), len(centers)), dtype=np.float64)
    for k, center in enumerate(centers):
        members = points[assignments == k]
        out[:, k] = symmetry_distances(points, center, members)
    return out
