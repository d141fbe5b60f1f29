# third party
import numpy as np

# first party
from schema import ClusteringConfig


def feature_points(
    rows: np.ndarray,
    cols: np.ndarray,
    values: np.ndarray,
    height: int,
    width: int,
    cfg: ClusteringConfig,
) -> np.ndarray:
    """
    Build the (n, 3) feature set clustered by sym_kmeans.

    Each pixel becomes (w_s * row/(H-1), w_s * col/(W-1), w_i * value/255).

    Args:
        rows: Pixel row indices
        cols: Pixel column indices
        values: Intensities on [0, 255]
        height: Grid height used to normalize rows
        width: Grid width used to normalize columns
        cfg: Supplies the spatial and intensity weights
    """
    row_norm = np.asarray(rows, dtype=np.float64) / max(height - 1, 1)
    col_norm = np.asarray(cols, dtype=np.float64) / max(width - 1, 1)
    intensity_norm = np.asarray(values, dtype=np.float64) / 255.0
    features = np.column_stack(
        [cfg.w_s * row_norm, cfg.w_s * col_norm, cfg.w_i * intensity_norm]
    )
    if not np.all(np.isfinite(features)):
        raise ValueError("feature vectors must be finite")
    return features
