# stdlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

# third party
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

GRID_SIZE = 256
MIDLINE_COL = GRID_SIZE // 2
BRAIN_CENTER: Tuple[int, int] = (128, 128)
# (rows, cols) semi-axes of the phantom brain ellipse
BRAIN_SEMI_AXES: Tuple[float, float] = (100.0, 80.0)
MAX_SYM = float(np.finfo(np.float64).max)


class SourceFormat(str, Enum):
    dicom_subset = "DicomSubset"
    pgm = "Pgm"
    png = "Png"


class Side(str, Enum):
    left = "Left"
    right = "Right"
    none = "None"


class ScanClass(str, Enum):
    within_normal_band = "WithinNormalBand"
    out_of_band = "OutOfBand"


class ReportFormat(str, Enum):
    json = "Json"
    csv = "Csv"


class EpsilonMode(str, Enum):
    sum = "sum"
    mean = "mean"


class CandidateMode(str, Enum):
    deficit = "deficit"
    excess = "excess"
    all = "all"


class LesionMode(str, Enum):
    deficit = "deficit"
    additive = "additive"


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major grid of intensities, shape (height, width, channels)."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray
    source_format: SourceFormat = SourceFormat.pgm

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64).reshape(
            self.height, self.width, self.channels
        )
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image must be at least 1x1, got {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 255.0):
            raise ValueError("channel values must lie in [0, 255]")
        object.__setattr__(self, "pixels", _freeze(pixels))

    @classmethod
    def from_array(cls, array: Any, source_format: SourceFormat = SourceFormat.pgm) -> "RasterImage":
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            array = array[:, :, None]
        height, width, channels = array.shape
        return cls(width, height, channels, array, source_format)

    @property
    def is_gray(self) -> bool:
        return self.channels == 1

    @property
    def plane(self) -> np.ndarray:
        """2-D view of a single-channel image."""
        if not self.is_gray:
            raise ValueError("plane is only defined for single-channel images")
        return self.pixels[:, :, 0]

    @property
    def flat(self) -> np.ndarray:
        return self.pixels.reshape(-1)


@dataclass(frozen=True, eq=False)
class NormalizedImage:
    grid: RasterImage
    intensity_rescaled: bool

    def __post_init__(self):
        if self.grid.width != GRID_SIZE or self.grid.height != GRID_SIZE:
            raise ValueError(
                f"normalized grid must be {GRID_SIZE}x{GRID_SIZE}, "
                f"got {self.grid.width}x{self.grid.height}"
            )

    @classmethod
    def from_array(cls, array: Any, intensity_rescaled: bool = False) -> "NormalizedImage":
        return cls(RasterImage.from_array(array), intensity_rescaled)

    @property
    def plane(self) -> np.ndarray:
        return self.grid.plane


@dataclass(frozen=True)
class MidlineEstimate:
    axis_col: int
    score: float


@dataclass(frozen=True, eq=False)
class AsymmetryMap:
    grid: np.ndarray
    mask: np.ndarray
    axis_col: int

    def __post_init__(self):
        object.__setattr__(self, "grid", _freeze(np.asarray(self.grid, dtype=np.float64)))
        object.__setattr__(self, "mask", _freeze(np.asarray(self.mask, dtype=bool)))


class ClusteringConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    w_s: float = Field(default=1.0, ge=0.0, description="Weight of the row/col features")
    w_i: float = Field(default=2.0, ge=0.0, description="Weight of the intensity feature")
    theta: float = Field(
        default=0.18,
        gt=0.0,
        lt=1.0,
        description=(
            "Symmetry acceptance threshold. A point joins the cluster minimizing its "
            "point-symmetry distance only when that minimum is below theta."
        ),
    )
    max_iter: int = Field(default=100, ge=1)
    tol: float = Field(default=1e-6, gt=0.0, description="Center-movement stop for Phase 1")
    seed: int = Field(default=0, ge=0, lt=2**64)
    epsilon_mode: EpsilonMode = Field(
        default=EpsilonMode.sum,
        description="sum: literal sum of symmetry distances; mean: sum of per-cluster means",
    )
    n_jobs: int = Field(default=1, ge=1, description="Threads used by select_k over K")

    @model_validator(mode="after")
    def check_weights(self):
        if self.w_s == 0.0 and self.w_i == 0.0:
            raise ValueError("w_s and w_i cannot both be zero")
        return self


@dataclass(eq=False)
class ClusterModel:
    k: int
    centers: np.ndarray
    assignments: np.ndarray
    epsilon_k: float = 0.0
    d_k: float = 0.0
    sym_index: float = 0.0
    perfectly_symmetric: bool = False

    def to_json(self) -> Dict[str, Any]:
        return {
            "k": int(self.k),
            "centers": [[float(v) for v in row] for row in self.centers],
            "assignments": [int(a) for a in self.assignments],
            "epsilon_k": float(self.epsilon_k),
            "d_k": float(self.d_k),
            "sym_index": float(self.sym_index),
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "ClusterModel":
        return cls(
            k=int(data["k"]),
            centers=np.asarray(data["centers"], dtype=np.float64),
            assignments=np.asarray(data["assignments"], dtype=np.intp),
            epsilon_k=float(data["epsilon_k"]),
            d_k=float(data["d_k"]),
            sym_index=float(data["sym_index"]),
            perfectly_symmetric=float(data["sym_index"]) == MAX_SYM,
        )


@dataclass
class SymIndexReport:
    entries: List[Tuple[int, float, ClusterModel]] = field(default_factory=list)
    k_star: int = 0

    @property
    def best(self) -> ClusterModel:
        for k, _, model in self.entries:
            if k == self.k_star:
                return model
        raise KeyError(self.k_star)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "k": k,
                    "sym_index": sym,
                    "epsilon_k": model.epsilon_k,
                    "d_k": model.d_k,
                    "selected": k == self.k_star,
                }
                for k, sym, model in self.entries
            ]
        )


class ClusterScore(BaseModel):
    id: int
    score: float


class FocusReport(BaseModel):
    side: Side = Side.none
    cluster_id: Optional[int] = None
    centroid: Optional[Tuple[float, float]] = None
    mean_asym: float = 0.0
    axis_col: int = MIDLINE_COL
    per_cluster: List[ClusterScore] = Field(default_factory=list)

    def to_json(self) -> Dict[str, Any]:
        data = self.model_dump(mode="json")
        if data["centroid"] is not None:
            data["centroid"] = list(data["centroid"])
        return data


class ThresholdBand(BaseModel):
    model_config = ConfigDict(frozen=True)

    lo: float = Field(default=85.0, ge=0.0, le=255.0)
    hi: float = Field(default=170.0, ge=0.0, le=255.0)

    @model_validator(mode="after")
    def check_order(self):
        if not self.lo < self.hi:
            raise ValueError(f"band lo ({self.lo}) must be below hi ({self.hi})")
        return self


class ChannelFractions(BaseModel):
    red: float = Field(ge=0.0, le=1.0)
    green: float = Field(ge=0.0, le=1.0)
    blue: float = Field(ge=0.0, le=1.0)


class IntensitySummary(BaseModel):
    label: str
    red: int = Field(ge=0)
    green: int = Field(ge=0)
    blue: int = Field(ge=0)
    in_band_fraction: ChannelFractions

    @property
    def sums(self) -> Dict[str, int]:
        return {"red": self.red, "green": self.green, "blue": self.blue}


class ComparisonRecord(BaseModel):
    label: str = ""
    red_ratio: float
    green_ratio: float
    blue_ratio: float
    red_deviation: float
    green_deviation: float
    blue_deviation: float

    @model_validator(mode="after")
    def check_signs(self):
        for channel in ("red", "green", "blue"):
            ratio = getattr(self, f"{channel}_ratio")
            deviation = getattr(self, f"{channel}_deviation")
            if ratio < 0:
                raise ValueError(f"{channel} ratio must be nonnegative")
            if np.sign(deviation) != np.sign(ratio - 1.0):
                raise ValueError(f"{channel} deviation sign disagrees with its ratio")
        return self


class ReportRow(BaseModel):
    """One line of the comparison report; field order is the CSV column order."""

    label: str
    red: int
    green: int
    blue: int
    red_ratio: float
    green_ratio: float
    blue_ratio: float


def inside_brain_ellipse(row: float, col: float) -> bool:
    (r0, c0), (a, b) = BRAIN_CENTER, BRAIN_SEMI_AXES
    return ((row - r0) / a) ** 2 + ((col - c0) / b) ** 2 <= 1.0


class PhantomSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0, lt=2**64)
    lesion_present: bool = False
    lesion_side: Side = Side.left
    lesion_center: Tuple[int, int] = (128, 96)
    lesion_radius: float = Field(default=10.0, ge=4.0, le=30.0)
    lesion_contrast: float = Field(default=0.3, ge=0.0, le=1.0)
    noise_sigma: float = Field(default=0.0, ge=0.0)
    lesion_mode: LesionMode = LesionMode.deficit

    @field_validator("lesion_side")
    @classmethod
    def check_side(cls, value: Side) -> Side:
        if value == Side.none:
            raise ValueError("lesion_side must be Left or Right")
        return value

    @model_validator(mode="after")
    def check_lesion(self):
        if not self.lesion_present:
            return self
        row, col = self.lesion_center
        if not inside_brain_ellipse(row, col):
            raise ValueError(f"lesion_center {self.lesion_center} lies outside the brain ellipse")
        on_left = col < MIDLINE_COL
        if on_left != (self.lesion_side == Side.left):
            raise ValueError(
                f"lesion_center column {col} disagrees with lesion_side {self.lesion_side.value}"
            )
        return self


class AccuracyReport(BaseModel):
    n: int = Field(ge=1)
    accuracy: float = Field(ge=0.0, le=1.0)
    sensitivity: float = Field(ge=0.0, le=1.0)
    specificity: float = Field(ge=0.0, le=1.0)
    mean_localization_error: Optional[float] = None
    true_positives: int = Field(ge=0)
    false_negatives: int = Field(ge=0)
    true_negatives: int = Field(ge=0)
    false_positives: int = Field(ge=0)

    @model_validator(mode="after")
    def check_counts(self):
        total = self.true_positives + self.false_negatives + self.true_negatives + self.false_positives
        if total != self.n:
            raise ValueError(f"confusion counts sum to {total}, expected n={self.n}")
        if self.accuracy != (self.true_positives + self.true_negatives) / self.n:
            raise ValueError("accuracy disagrees with the confusion counts")
        return self
