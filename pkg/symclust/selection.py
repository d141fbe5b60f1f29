# stdlib
from concurrent.futures import ThreadPoolExecutor

# third party
import numpy as np

# first party
from exceptions import BadRange, TooFewPoints
from helpers import get_logger
from schema import ClusteringConfig, SymIndexReport
from symclust.kmeans import sym_kmeans

logger = get_logger(__name__)


def select_k(points: np.ndarray, k_min: int, k_max: int, cfg: ClusteringConfig) -> SymIndexReport:
    """
    Cluster once per K in [k_min, k_max] and keep the K maximizing Sym(K).

    Ties go to the smaller K. Runs may execute on ``cfg.n_jobs`` threads; every
    run is seeded identically, so the report does not depend on the thread count.
    """
    if k_min < 2 or k_min > k_max:
        raise BadRange(f"invalid K range [{k_min}, {k_max}]")
    points = np.asarray(points, dtype=np.float64)
    if len(points) < k_max:
        raise TooFewPoints(f"{len(points)} points cannot form {k_max} clusters")

    ks = list(range(k_min, k_max + 1))
    if cfg.n_jobs > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            models = list(pool.map(lambda k: sym_kmeans(points, k, cfg), ks))
    else:
        models = [sym_kmeans(points, k, cfg) for k in ks]

    report = SymIndexReport(entries=[(m.k, m.sym_index, m) for m in models])
    best_k, best_sym = ks[0], models[0].sym_index
    for k, sym, _ in report.entries[1:]:
        if sym > best_sym:
            best_k, best_sym = k, sym
    report.k_star = best_k
    logger.info("Selected k_star=%s sym_index=%.6g range=[%s, %s]", best_k, best_sym, k_min, k_max)
    return report
