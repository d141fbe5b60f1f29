# third party
import numpy as np
from scipy.spatial.distance import pdist

# first party
from exceptions import DegenerateCluster, SingleCluster
from schema import MAX_SYM, ClusterModel, EpsilonMode
from symclust.distance import symmetry_distances

PERFECT_SYMMETRY_EPSILON = 1e-12


def epsilon_k(model: ClusterModel, points: np.ndarray, mode: EpsilonMode = EpsilonMode.sum) -> float:
    """
    Total point-symmetry distance of every point about its own cluster center.

    ``mode=sum`` adds every d_ps; ``mode=mean`` adds the per-cluster means.
    """
    points = np.asarray(points, dtype=np.float64)
    assignments = np.asarray(model.assignments)
    if len(assignments) != len(points):
        raise ValueError(f"{len(assignments)} assignments for {len(points)} points")
    total = 0.0
    for k in range(model.k):
        members = points[assignments == k]
        if not len(members):
            raise DegenerateCluster(f"cluster {k} is empty")
        distances = symmetry_distances(members, model.centers[k], members)
        total += float(distances.mean() if mode == EpsilonMode.mean else distances.sum())
    return total


def max_center_separation(model: ClusterModel) -> float:
    """D_K: the largest Euclidean distance between two cluster centers."""
    if model.k < 2:
        raise SingleCluster("D_K needs at least two centers")
    return float(pdist(np.asarray(model.centers, dtype=np.float64)).max())


def sym_index(model: ClusterModel) -> float:
    """
    Sym(K) = (1/K) * (1/epsilon_K) * D_K.

    A model whose epsilon_K is below 1e-12 is flagged perfectly symmetric and
    scores MAX_SYM.
    """
    if model.k < 2:
        raise SingleCluster("Sym(K) needs at least two clusters")
    if model.epsilon_k < PERFECT_SYMMETRY_EPSILON:
        model.perfectly_symmetric = True
        return MAX_SYM
    model.perfectly_symmetric = False
    return model.d_k / (model.k * model.epsilon_k)
