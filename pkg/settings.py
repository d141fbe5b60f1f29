# stdlib
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

# third party
import yaml
from dotenv import load_dotenv
from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# first party
from exceptions import ConfigError
from schema import (
    CandidateMode,
    ClusteringConfig,
    EpsilonMode,
    LesionMode,
    ReportFormat,
    ThresholdBand,
)

load_dotenv()

CLUSTERING_FIELDS = tuple(ClusteringConfig.model_fields)


class PipelineConfig(BaseSettings):
    """
    Every knob of the pipeline. Values come from field defaults, then
    SYMSCAN_* environment variables, then a --config file, then CLI flags.
    """

    model_config = SettingsConfigDict(env_prefix="SYMSCAN_", extra="forbid", frozen=True)

    # clustering
    w_s: float = Field(default=1.0, ge=0.0)
    w_i: float = Field(default=2.0, ge=0.0)
    theta: float = Field(default=0.18, gt=0.0, lt=1.0)
    max_iter: int = Field(default=100, ge=1)
    tol: float = Field(default=1e-6, gt=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    epsilon_mode: EpsilonMode = EpsilonMode.sum
    n_jobs: int = Field(default=1, ge=1)
    k_min: int = Field(default=2, ge=2)
    k_max: int = Field(default=6, ge=2)

    # asymmetry
    tau_a: float = Field(default=8.0, gt=0.0, description="Minimum mean asymmetry of a focus cluster")
    background: float = Field(default=10.0, ge=0.0, le=255.0, description="Brain mask threshold b")
    candidate_mode: CandidateMode = CandidateMode.deficit
    deficit_floor: float = Field(default=15.0, ge=0.0)
    min_candidates: int = Field(default=20, ge=2)

    # intensity report
    band_lo: float = Field(default=85.0, ge=0.0, le=255.0)
    band_hi: float = Field(default=170.0, ge=0.0, le=255.0)
    tau_b: float = Field(default=0.5, gt=0.0, lt=1.0)
    report_format: ReportFormat = ReportFormat.csv

    # phantoms
    lesion_radius: float = Field(default=10.0, ge=4.0, le=30.0)
    lesion_contrast: float = Field(default=0.3, ge=0.0, le=1.0)
    noise_sigma: float = Field(default=5.0, ge=0.0)
    lesion_mode: LesionMode = LesionMode.deficit

    # paths
    input: Optional[Path] = None
    baseline: Optional[Path] = None
    out: Optional[Path] = None

    log_level: str = "INFO"

    @model_validator(mode="after")
    def check_ranges(self):
        if self.k_max < self.k_min:
            raise ValueError(f"k_max ({self.k_max}) must be at least k_min ({self.k_min})")
        if self.w_s == 0.0 and self.w_i == 0.0:
            raise ValueError("w_s and w_i cannot both be zero")
        if not self.band_lo < self.band_hi:
            raise ValueError(f"band_lo ({self.band_lo}) must be below band_hi ({self.band_hi})")
        return self

    @property
    def clustering(self) -> ClusteringConfig:
        return ClusteringConfig(**{name: getattr(self, name) for name in CLUSTERING_FIELDS})

    @property
    def band(self) -> ThresholdBand:
        return ThresholdBand(lo=self.band_lo, hi=self.band_hi)

    def focus_options(self) -> Dict[str, Any]:
        return {
            "background": self.background,
            "candidate_mode": self.candidate_mode,
            "deficit_floor": self.deficit_floor,
            "min_candidates": self.min_candidates,
        }


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Parse a JSON config file, or YAML when the suffix is .yaml/.yml."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"config file {path} is not valid: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping of field names to values")
    return data


def load_config(config_path: Optional[Union[str, Path]] = None, **overrides) -> PipelineConfig:
    """
    Build a PipelineConfig. ``overrides`` are CLI flag values; ``None`` means
    the flag was not given.
    """
    values = read_config_file(config_path) if config_path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig(**values)
    except ValidationError as e:
        errors = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(errors) from e
