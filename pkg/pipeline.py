# stdlib
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

# third party
import numpy as np
import pandas as pd
from pydantic import ValidationError

# first party
from asymmetry import FocusAnalysis, analyze_focus
from audit_logger import log_stage_execution
from chart import create_intensity_chart, create_sym_index_chart, write_chart_html
from exceptions import ClusteringError, ConfigError, InputError
from helpers import convert_df, encode_json, get_logger, write_artifacts
from image_io import load_image_file, normalize_image, to_grayscale, write_pgm
from intensity_report import build_report_rows, channel_summary, classify_scan, emit_report
from phantom import (
    evaluate_detections,
    generate_phantom,
    random_phantom_specs,
    read_spec_batch,
    write_spec_batch,
)
from schema import (
    AccuracyReport,
    FocusReport,
    IntensitySummary,
    NormalizedImage,
    RasterImage,
    ReportFormat,
    ReportRow,
)
from settings import PipelineConfig

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2

SPECS_FILE = "specs.json"
ACCURACY_FILE = "accuracy.json"
SYM_INDEX_COLUMNS = ["k", "sym_index", "epsilon_k", "d_k", "selected"]


@contextmanager
def audited(stage: str, subject: str):
    """Time a stage and record its outcome in the audit log."""
    start = time.perf_counter()
    record = {"item_count": None}
    try:
        yield record
    except Exception as e:
        log_stage_execution(
            stage,
            subject,
            status="failed",
            duration_ms=(time.perf_counter() - start) * 1000.0,
            error_message=str(e),
        )
        raise
    log_stage_execution(
        stage,
        subject,
        duration_ms=(time.perf_counter() - start) * 1000.0,
        item_count=record["item_count"],
    )


def phantom_file_name(index: int) -> str:
    return f"phantom_{index:04d}.pgm"


def _require(value, name: str):
    if value is None:
        raise ConfigError(f"{name} is required")
    return value


def load_raw(path: Path) -> RasterImage:
    with audited("load", path.name) as record:
        raw = load_image_file(path)
        record["item_count"] = raw.width * raw.height
    return raw


def load_scan(path: Path) -> Tuple[RasterImage, NormalizedImage]:
    """Read a scan and bring it onto the analysis grid."""
    raw = load_raw(path)
    with audited("normalize", path.name):
        normalized = normalize_image(to_grayscale(raw))
    return raw, normalized


def detect(img: NormalizedImage, cfg: PipelineConfig, subject: str) -> FocusAnalysis:
    with audited("detect_focus", subject) as record:
        analysis = analyze_focus(
            img, cfg.clustering, cfg.k_min, cfg.k_max, cfg.tau_a, **cfg.focus_options()
        )
        record["item_count"] = 0 if analysis.coords is None else len(analysis.coords)
    return analysis


def summarize(raw: RasterImage, cfg: PipelineConfig, label: str) -> IntensitySummary:
    with audited("channel_summary", label):
        summary = channel_summary(raw, cfg.band, label)
    scan_class = classify_scan(summary, cfg.band, cfg.tau_b)
    logger.info("Classified scan label=%s class=%s", label, scan_class.value)
    return summary


def _model_json(analysis: FocusAnalysis) -> bytes:
    model = analysis.model
    return encode_json(model.to_json() if model is not None else None)


def _amap_pgm(analysis: FocusAnalysis) -> bytes:
    return write_pgm(RasterImage.from_array(np.clip(analysis.amap.grid, 0.0, 255.0)))


def segment_artifacts(cfg: PipelineConfig, plot: Optional[Path] = None) -> Dict[str, bytes]:
    """model.json and the Sym(K) table of one scan; ``plot`` also gets the Sym(K) chart."""
    path = _require(cfg.input, "input")
    _, img = load_scan(path)
    analysis = detect(img, cfg, path.name)
    if analysis.selection is not None:
        table = analysis.selection.to_frame()
        if plot is not None:
            write_chart_html(create_sym_index_chart(analysis.selection), plot)
    else:
        table = pd.DataFrame(columns=SYM_INDEX_COLUMNS)
    return {"model.json": _model_json(analysis), "sym_index.csv": convert_df(table)}


def analyze_artifacts(cfg: PipelineConfig) -> Dict[str, bytes]:
    """focus.json and the asymmetry map of one scan."""
    path = _require(cfg.input, "input")
    _, img = load_scan(path)
    analysis = detect(img, cfg, path.name)
    return {
        "focus.json": encode_json(analysis.focus.to_json()),
        "asymmetry.pgm": _amap_pgm(analysis),
    }


def report_rows(
    cfg: PipelineConfig, inputs: Sequence[Path]
) -> Tuple[List[ReportRow], Dict[str, str]]:
    baseline = None
    if cfg.baseline is not None:
        baseline = summarize(load_raw(cfg.baseline), cfg, cfg.baseline.name)
    summaries = [summarize(load_raw(path), cfg, path.name) for path in inputs]
    with audited("emit_report", ",".join(p.name for p in inputs)) as record:
        rows = build_report_rows(baseline, summaries)
        record["item_count"] = len(rows)
    scanned = ([baseline] if baseline is not None else []) + summaries
    classes = {s.label: classify_scan(s, cfg.band, cfg.tau_b).value for s in scanned}
    return rows, classes


def report_artifacts(
    cfg: PipelineConfig, inputs: Sequence[Path], plot: Optional[Path] = None
) -> Dict[str, bytes]:
    """
    report.csv (or report.json) plus the band classification of every scan.
    With ``plot`` the comparison chart is also written there as HTML.
    """
    if not inputs:
        inputs = [_require(cfg.input, "input")]
    rows, classes = report_rows(cfg, inputs)
    if plot is not None:
        write_chart_html(create_intensity_chart(rows), plot)
    name = "report.json" if cfg.report_format == ReportFormat.json else "report.csv"
    return {name: emit_report(rows, cfg.report_format), "classes.json": encode_json(classes)}


def pipeline_artifacts(cfg: PipelineConfig) -> Dict[str, bytes]:
    """load, grayscale, normalize, detect_focus, channel_summary, emit_report."""
    path = _require(cfg.input, "input")
    raw, img = load_scan(path)
    analysis = detect(img, cfg, path.name)

    baseline = None
    if cfg.baseline is not None:
        baseline = summarize(load_raw(cfg.baseline), cfg, cfg.baseline.name)
    with audited("emit_report", path.name):
        rows = build_report_rows(baseline, [summarize(raw, cfg, path.name)])
        report = emit_report(rows, ReportFormat.csv)

    return {
        "focus.json": encode_json(analysis.focus.to_json()),
        "report.csv": report,
        "model.json": _model_json(analysis),
        "asymmetry.pgm": _amap_pgm(analysis),
    }


def phantom_gen_artifacts(cfg: PipelineConfig, n: int) -> Dict[str, bytes]:
    """specs.json and one PGM per phantom."""
    specs = random_phantom_specs(
        n,
        cfg.seed,
        lesion_radius=cfg.lesion_radius,
        lesion_contrast=cfg.lesion_contrast,
        noise_sigma=cfg.noise_sigma,
        lesion_mode=cfg.lesion_mode,
    )
    artifacts = {SPECS_FILE: write_spec_batch(specs)}
    with audited("phantom_gen", f"seed={cfg.seed}") as record:
        for i, spec in enumerate(specs):
            img, _ = generate_phantom(spec)
            artifacts[phantom_file_name(i)] = write_pgm(img.grid)
        record["item_count"] = n
    return artifacts


def evaluate_directory(cfg: PipelineConfig, directory: Path) -> AccuracyReport:
    """Detect on every phantom of a generated batch and score against its specs."""
    specs = read_spec_batch((directory / SPECS_FILE).read_bytes())

    def run_trial(index: int) -> FocusReport:
        _, img = load_scan(directory / phantom_file_name(index))
        return detect(img, cfg, phantom_file_name(index)).focus

    indices = range(len(specs))
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            reports = list(pool.map(run_trial, indices))
    else:
        reports = [run_trial(i) for i in indices]
    return evaluate_detections(list(zip(reports, specs)))


def phantom_eval_artifacts(cfg: PipelineConfig, directory: Path) -> Dict[str, bytes]:
    return {ACCURACY_FILE: encode_json(evaluate_directory(cfg, directory).model_dump(mode="json"))}


def run_stage(build: Callable[[], Dict[str, bytes]], out_dir: Optional[Path]) -> int:
    """
    Build every artifact in memory, then write them all. Failures map to exit
    status 1 (input) or 2 (configuration) and leave ``out_dir`` untouched.
    """
    try:
        out_dir = _require(out_dir, "out")
        artifacts = build()
        written: List[Path] = write_artifacts(out_dir, artifacts)
    except (ConfigError, ValidationError) as e:
        logger.error("Invalid configuration error=%s", " ".join(str(e).split()))
        return EXIT_CONFIG
    except (InputError, ClusteringError, OSError) as e:
        logger.error("Run failed error_type=%s error=%s", type(e).__name__, " ".join(str(e).split()))
        return EXIT_INPUT
    logger.info("Wrote artifacts out=%s files=%s", out_dir, len(written))
    return EXIT_OK


def run_pipeline(cfg: PipelineConfig) -> int:
    """
    Run every stage on ``cfg.input`` and write focus.json, report.csv,
    model.json and asymmetry.pgm into ``cfg.out``. Returns the exit status.
    """
    return run_stage(lambda: pipeline_artifacts(cfg), cfg.out)
