# stdlib
from typing import Tuple

# third party
import numpy as np

# first party
from exceptions import SingleCluster, TooFewPoints
from helpers import get_logger
from schema import ClusterModel, ClusteringConfig
from symclust.distance import symmetry_distance_matrix
from symclust.validity import epsilon_k, max_center_separation, sym_index

logger = get_logger(__name__)


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """
    Greedy D^2-weighted seeding; the first center is drawn uniformly.

    Each later step draws 2 + log(k) candidates and keeps the one that most
    reduces the total squared distance to the nearest center.
    """
    n = len(points)
    trials = 2 + int(np.log(k))
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[rng.integers(0, n)]
    closest = np.sum((points - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total > 0.0:
            candidates = rng.choice(n, size=trials, p=closest / total)
        else:
            candidates = rng.integers(0, n, size=trials)
        spread = np.sum((points[None, :, :] - points[candidates][:, None, :]) ** 2, axis=2)
        potentials = np.minimum(closest[None, :], spread)
        best = int(np.argmin(potentials.sum(axis=1)))
        centers[i] = points[candidates[best]]
        closest = potentials[best]
    return centers


def nearest_center(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    distances = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.argmin(distances, axis=1)


def cluster_means(points: np.ndarray, assignments: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(assignments, minlength=k).astype(np.float64)
    sums = np.zeros((k, points.shape[1]), dtype=np.float64)
    np.add.at(sums, assignments, points)
    return sums / np.maximum(counts, 1.0)[:, None]


def repair_empty(points: np.ndarray, centers: np.ndarray, assignments: np.ndarray, k: int) -> np.ndarray:
    """Reseed each empty cluster with the point farthest from its own center."""
    assignments = assignments.copy()
    while True:
        counts = np.bincount(assignments, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if not empty.size:
            return assignments
        spread = np.sum((points - centers[assignments]) ** 2, axis=1)
        # never take the last member of a cluster
        spread[counts[assignments] < 2] = -1.0
        donor = int(np.argmax(spread))
        logger.warning(
            "Repairing empty cluster cluster=%s donor_point=%s from_cluster=%s",
            int(empty[0]),
            donor,
            int(assignments[donor]),
        )
        assignments[donor] = empty[0]
        centers = centers.copy()
        centers[empty[0]] = points[donor]


def lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Standard K-means. Returned labels are Euclidean-nearest to the returned centers."""
    k = len(centers)
    labels = repair_empty(points, centers, nearest_center(points, centers), k)
    for iteration in range(max_iter):
        new_centers = cluster_means(points, labels, k)
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        new_labels = nearest_center(points, centers)
        stable = np.array_equal(new_labels, labels)
        labels = repair_empty(points, centers, new_labels, k)
        logger.debug("Phase 1 iteration=%s shift=%s stable=%s", iteration, shift, stable)
        if stable or shift < tol:
            break
    return centers, labels


def symmetry_reassign(points: np.ndarray, centers: np.ndarray, assignments: np.ndarray, theta: float) -> np.ndarray:
    """
    One symmetry sweep: each point joins the cluster minimizing its
    point-symmetry distance when that minimum is below ``theta``, otherwise
    its Euclidean-nearest center.
    """
    dps = symmetry_distance_matrix(points, centers, assignments)
    by_symmetry = np.argmin(dps, axis=1)
    closest = dps[np.arange(len(points)), by_symmetry]
    return np.where(closest < theta, by_symmetry, nearest_center(points, centers))


def sym_kmeans(points: np.ndarray, k: int, cfg: ClusteringConfig) -> ClusterModel:
    """
    Point-symmetry K-means.

    Phase 1 runs K-means from a seeded k-means++ start. Phase 2 alternates
    symmetry reassignment and mean updates until the labels stop changing or
    ``cfg.max_iter`` sweeps have run. The returned model has no empty cluster
    and carries epsilon_K, D_K and Sym(K).
    """
    points = np.asarray(points, dtype=np.float64)
    if k < 2:
        raise SingleCluster(f"K must be at least 2, got {k}")
    if len(points) < k:
        raise TooFewPoints(f"{len(points)} points cannot form {k} clusters")

    rng = np.random.default_rng(cfg.seed)
    centers, labels = lloyd(points, kmeans_plusplus(points, k, rng), cfg.max_iter, cfg.tol)

    sweeps = 0
    for sweeps in range(1, cfg.max_iter + 1):
        new_labels = symmetry_reassign(points, centers, labels, cfg.theta)
        new_labels = repair_empty(points, centers, new_labels, k)
        centers = cluster_means(points, new_labels, k)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    model = ClusterModel(k=k, centers=centers, assignments=labels)
    model.epsilon_k = epsilon_k(model, points, cfg.epsilon_mode)
    model.d_k = max_center_separation(model)
    model.sym_index = sym_index(model)
    logger.info(
        "Clustered points=%s k=%s phase2_sweeps=%s epsilon_k=%.6g d_k=%.6g sym_index=%.6g",
        len(points),
        k,
        sweeps,
        model.epsilon_k,
        model.d_k,
        model.sym_index,
    )
    return model
