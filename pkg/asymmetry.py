# stdlib
from dataclasses import dataclass
from typing import List, Optional, Tuple

# third party
import numpy as np
from scipy import ndimage

# first party
from exceptions import EmptyMask, FlatImage
from helpers import get_logger
from schema import (
    AsymmetryMap,
    CandidateMode,
    ClusterModel,
    ClusterScore,
    ClusteringConfig,
    FocusReport,
    MidlineEstimate,
    NormalizedImage,
    RasterImage,
    Side,
    SymIndexReport,
)
from symclust.features import feature_points
from symclust.selection import select_k

logger = get_logger(__name__)

MIDLINE_BAND = (0.4, 0.6)
DEFAULT_BACKGROUND = 10.0
DEFAULT_TAU_A = 8.0
DEFAULT_DEFICIT_FLOOR = 15.0
DEFAULT_MIN_CANDIDATES = 20


@dataclass
class FocusAnalysis:
    """Everything detect_focus computes on the way to its FocusReport."""

    midline: MidlineEstimate
    amap: AsymmetryMap
    focus: FocusReport
    selection: Optional[SymIndexReport] = None
    coords: Optional[np.ndarray] = None

    @property
    def model(self) -> Optional[ClusterModel]:
        return self.selection.best if self.selection is not None else None


def _mirror_columns(width: int, axis_col: int) -> Tuple[np.ndarray, np.ndarray]:
    cols = np.arange(width)
    source = 2 * axis_col - cols
    return source, (source >= 0) & (source < width)


def _reflect_plane(plane: np.ndarray, axis_col: int) -> np.ndarray:
    source, valid = _mirror_columns(plane.shape[1], axis_col)
    out = np.zeros_like(plane)
    out[:, valid] = plane[:, source[valid]]
    return out


def _ncc(left: np.ndarray, right: np.ndarray) -> float:
    if np.array_equal(left, right):
        return 1.0
    a = left - left.mean()
    b = right - right.mean()
    denominator = np.sqrt(np.sum(a * a)) * np.sqrt(np.sum(b * b))
    if denominator == 0.0:
        return 0.0
    return float(np.clip(np.sum(a * b) / denominator, -1.0, 1.0))


def estimate_midline(img: NormalizedImage) -> MidlineEstimate:
    """
    Find the mirror axis column in the central 40-60% band of the grid.

    Each candidate axis a compares columns a-j and a+j (j >= 1) by normalized
    cross-correlation. The best score wins; ties go to the column nearest W/2.
    """
    plane = img.plane
    if plane.max() == plane.min():
        raise FlatImage("image has zero variance; no midline can be estimated")
    width = plane.shape[1]
    center = width // 2
    lo = int(np.floor(MIDLINE_BAND[0] * width))
    hi = int(np.ceil(MIDLINE_BAND[1] * width))

    best: Optional[MidlineEstimate] = None
    for axis_col in range(lo, hi + 1):
        half = min(axis_col, width - 1 - axis_col)
        left = plane[:, axis_col - half : axis_col][:, ::-1]
        right = plane[:, axis_col + 1 : axis_col + 1 + half]
        score = _ncc(left, right)
        if (
            best is None
            or score > best.score
            or (score == best.score and abs(axis_col - center) < abs(best.axis_col - center))
        ):
            best = MidlineEstimate(axis_col=axis_col, score=score)
    logger.info("Estimated midline axis_col=%s score=%.6f", best.axis_col, best.score)
    return best


def reflect_image(img: NormalizedImage, m: MidlineEstimate) -> NormalizedImage:
    """output(r, c) = input(r, 2*axis - c), or 0 where that column is off the grid."""
    pixels = img.grid.pixels
    source, valid = _mirror_columns(pixels.shape[1], m.axis_col)
    out = np.zeros_like(pixels)
    out[:, valid, :] = pixels[:, source[valid], :]
    return NormalizedImage(RasterImage.from_array(out, img.grid.source_format), img.intensity_rescaled)


def brain_mask(img: NormalizedImage, m: MidlineEstimate, background: float = DEFAULT_BACKGROUND) -> np.ndarray:
    """
    Pixels above ``background`` after a 3x3 median, united with their mirror
    images; columns whose mirror falls off the grid are excluded.
    """
    smoothed = ndimage.median_filter(img.plane, size=3, mode="nearest")
    mask = smoothed > background
    _, paired = _mirror_columns(mask.shape[1], m.axis_col)
    mirrored = _reflect_plane(mask.astype(np.uint8), m.axis_col).astype(bool)
    return (mask | mirrored) & paired[None, :]


def asymmetry_map(img: NormalizedImage, m: MidlineEstimate, background: float = DEFAULT_BACKGROUND) -> AsymmetryMap:
    mask = brain_mask(img, m, background)
    if not mask.any():
        raise EmptyMask(f"no pixel exceeds the background threshold {background}")
    plane = img.plane
    grid = np.abs(plane - _reflect_plane(plane, m.axis_col))
    grid[~mask] = 0.0
    return AsymmetryMap(grid=grid, mask=mask, axis_col=m.axis_col)


def signed_difference(img: NormalizedImage, m: MidlineEstimate) -> np.ndarray:
    """Median-smoothed image minus its reflection; negative where a hemisphere is darker."""
    smoothed = ndimage.median_filter(img.plane, size=3, mode="nearest")
    delta = smoothed - _reflect_plane(smoothed, m.axis_col)
    _, paired = _mirror_columns(delta.shape[1], m.axis_col)
    delta[:, ~paired] = 0.0
    return delta


def score_cluster_asymmetry(
    model: ClusterModel, amap: AsymmetryMap, coords: Optional[np.ndarray] = None
) -> List[Tuple[int, float]]:
    """
    Mean asymmetry of the in-mask pixels of each cluster.

    Args:
        model: Clustering whose assignments label pixels
        amap: Asymmetry map over the same grid
        coords: (n, 2) row/col of each clustered point; when omitted the
            assignments must cover the whole grid in row-major order

    Returns:
        (cluster_id, mean_asym) per cluster; clusters with no in-mask pixel score 0
    """
    labels = np.full(amap.grid.shape, -1, dtype=np.intp)
    assignments = np.asarray(model.assignments, dtype=np.intp)
    if coords is None:
        labels = assignments.reshape(amap.grid.shape)
    else:
        coords = np.asarray(coords, dtype=np.intp)
        labels[coords[:, 0], coords[:, 1]] = assignments
    selected = amap.mask & (labels >= 0)
    sums = np.bincount(labels[selected], weights=amap.grid[selected], minlength=model.k)
    counts = np.bincount(labels[selected], minlength=model.k)
    means = np.divide(sums, counts, out=np.zeros(model.k), where=counts > 0)
    return [(k, float(means[k])) for k in range(model.k)]


def candidate_pixels(
    img: NormalizedImage,
    m: MidlineEstimate,
    amap: AsymmetryMap,
    mode: CandidateMode = CandidateMode.deficit,
    deficit_floor: float = DEFAULT_DEFICIT_FLOOR,
) -> np.ndarray:
    """
    (n, 2) row/col of the in-mask pixels to cluster, ordered by
    (row, distance from the axis, col) so a mirrored scan lists mirrored pixels
    in the same order.
    """
    if mode == CandidateMode.all:
        selected = amap.mask
    else:
        delta = signed_difference(img, m)
        if mode == CandidateMode.deficit:
            selected = amap.mask & (delta < -deficit_floor)
        else:
            selected = amap.mask & (delta > deficit_floor)
    rows, cols = np.nonzero(selected)
    order = np.lexsort((cols, np.abs(cols - m.axis_col), rows))
    return np.column_stack([rows[order], cols[order]])


def _attribute_side(cols: np.ndarray, centroid_col: float, axis_col: int) -> Side:
    left = int(np.count_nonzero(cols < axis_col))
    right = int(np.count_nonzero(cols > axis_col))
    if left != right:
        return Side.left if left > right else Side.right
    return Side.left if centroid_col < axis_col else Side.right


def analyze_focus(
    img: NormalizedImage,
    cfg: ClusteringConfig,
    k_min: int,
    k_max: int,
    tau_a: float = DEFAULT_TAU_A,
    *,
    background: float = DEFAULT_BACKGROUND,
    candidate_mode: CandidateMode = CandidateMode.deficit,
    deficit_floor: float = DEFAULT_DEFICIT_FLOOR,
    min_candidates: int = DEFAULT_MIN_CANDIDATES,
) -> FocusAnalysis:
    if tau_a <= 0:
        raise ValueError(f"tau_a must be positive, got {tau_a}")
    midline = estimate_midline(img)
    amap = asymmetry_map(img, midline, background)
    coords = candidate_pixels(img, midline, amap, candidate_mode, deficit_floor)
    logger.info(
        "Focus candidates mode=%s count=%s axis_col=%s",
        CandidateMode(candidate_mode).value,
        len(coords),
        midline.axis_col,
    )

    if len(coords) < max(min_candidates, k_min):
        focus = FocusReport(side=Side.none, axis_col=midline.axis_col)
        return FocusAnalysis(midline=midline, amap=amap, focus=focus, coords=coords)

    k_hi = min(k_max, len(coords))
    if k_hi < k_max:
        logger.warning("Clamped k_max from=%s to=%s candidates=%s", k_max, k_hi, len(coords))
    rows, cols = coords[:, 0], coords[:, 1]
    plane = img.plane
    features = feature_points(rows, cols, plane[rows, cols], plane.shape[0], plane.shape[1], cfg)
    selection = select_k(features, k_min, k_hi, cfg)
    model = selection.best

    scores = score_cluster_asymmetry(model, amap, coords)
    best_id, best_score = max(scores, key=lambda item: (item[1], -item[0]))
    members = (model.assignments == best_id) & amap.mask[rows, cols]
    centroid = (float(rows[members].mean()), float(cols[members].mean()))
    side = Side.none
    if best_score >= tau_a:
        side = _attribute_side(cols[members], centroid[1], midline.axis_col)

    focus = FocusReport(
        side=side,
        cluster_id=best_id,
        centroid=centroid,
        mean_asym=best_score,
        axis_col=midline.axis_col,
        per_cluster=[ClusterScore(id=k, score=s) for k, s in scores],
    )
    logger.info(
        "Focus decision side=%s cluster_id=%s mean_asym=%.4f tau_a=%s k_star=%s",
        side.value,
        best_id,
        best_score,
        tau_a,
        selection.k_star,
    )
    return FocusAnalysis(midline=midline, amap=amap, focus=focus, selection=selection, coords=coords)


def detect_focus(
    img: NormalizedImage,
    cfg: ClusteringConfig,
    k_min: int,
    k_max: int,
    tau_a: float = DEFAULT_TAU_A,
    **options,
) -> FocusReport:
    """
    Midline, asymmetry map, Sym(K) clustering of the candidate pixels, then the
    most asymmetric cluster decides the focus. ``options`` are the keyword
    arguments of analyze_focus.
    """
    return analyze_focus(img, cfg, k_min, k_max, tau_a, **options).focus
