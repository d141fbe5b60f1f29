# stdlib
import json
from typing import Iterable, List, Optional, Sequence, Tuple, Union

# third party
import numpy as np
import pandas as pd

# first party
from exceptions import EmptyInput, MalformedHeader, ZeroBaseline
from helpers import convert_df, encode_json, get_logger, read_csv_bytes, to_jsonable
from schema import (
    ChannelFractions,
    ComparisonRecord,
    IntensitySummary,
    RasterImage,
    ReportFormat,
    ReportRow,
    ScanClass,
    ThresholdBand,
)

logger = get_logger(__name__)

CHANNELS = ("red", "green", "blue")
REPORT_COLUMNS = list(ReportRow.model_fields)
DEFAULT_TAU_B = 0.5

ReportEntry = Union[ReportRow, IntensitySummary, Tuple[IntensitySummary, ComparisonRecord]]


def _channel_planes(img: RasterImage, rounded: bool = True) -> List[np.ndarray]:
    values = np.rint(img.pixels).astype(np.int64) if rounded else img.pixels
    if img.is_gray:
        return [values[:, :, 0]] * 3
    return [values[:, :, c] for c in range(3)]


def channel_summary(img: RasterImage, band: ThresholdBand, label: str) -> IntensitySummary:
    """
    Per-channel sums of rounded values plus the fraction of pixels whose
    unrounded value lies inside the band (both endpoints inclusive). Gray
    images report one value for all three channels.
    """
    n_pixels = img.width * img.height
    sums = {name: int(plane.sum(dtype=np.int64)) for name, plane in zip(CHANNELS, _channel_planes(img))}
    fractions = {
        name: int(np.count_nonzero((plane >= band.lo) & (plane <= band.hi))) / n_pixels
        for name, plane in zip(CHANNELS, _channel_planes(img, rounded=False))
    }
    return IntensitySummary(label=label, in_band_fraction=ChannelFractions(**fractions), **sums)


def compare_summaries(normal: IntensitySummary, test: IntensitySummary) -> ComparisonRecord:
    """test/normal ratio and percent deviation per channel."""
    values = {}
    for name in CHANNELS:
        base = getattr(normal, name)
        if base == 0:
            raise ZeroBaseline(f"baseline {normal.label!r} has a zero {name} sum")
        value = getattr(test, name)
        values[f"{name}_ratio"] = value / base
        values[f"{name}_deviation"] = 100.0 * (value - base) / base
    return ComparisonRecord(label=test.label, **values)


def classify_scan(
    summary: IntensitySummary, band: ThresholdBand, tau_b: float = DEFAULT_TAU_B
) -> ScanClass:
    """OutOfBand when any channel has strictly more than ``tau_b`` of its pixels outside the band."""
    if not 0.0 < tau_b < 1.0:
        raise ValueError(f"tau_b must lie in (0, 1), got {tau_b}")
    fractions = summary.in_band_fraction
    for name in CHANNELS:
        if 1.0 - getattr(fractions, name) > tau_b:
            return ScanClass.out_of_band
    return ScanClass.within_normal_band


def report_row(summary: IntensitySummary, record: ComparisonRecord) -> ReportRow:
    return ReportRow(
        label=summary.label,
        red=summary.red,
        green=summary.green,
        blue=summary.blue,
        red_ratio=record.red_ratio,
        green_ratio=record.green_ratio,
        blue_ratio=record.blue_ratio,
    )


def build_report_rows(
    normal: Optional[IntensitySummary], tests: Iterable[IntensitySummary]
) -> List[ReportRow]:
    """
    Pair each summary with its comparison against ``normal``. The baseline is
    the first row and compares with itself; without a baseline every scan
    compares with itself.
    """
    rows = []
    if normal is not None:
        rows.append(report_row(normal, compare_summaries(normal, normal)))
    for summary in tests:
        baseline = normal if normal is not None else summary
        rows.append(report_row(summary, compare_summaries(baseline, summary)))
    return rows


def _as_row(entry: ReportEntry) -> ReportRow:
    if isinstance(entry, ReportRow):
        return entry
    if isinstance(entry, IntensitySummary):
        return report_row(entry, compare_summaries(entry, entry))
    summary, record = entry
    return report_row(summary, record)


def report_frame(entries: Sequence[ReportEntry]) -> pd.DataFrame:
    rows = [_as_row(entry) for entry in entries]
    return pd.DataFrame([row.model_dump() for row in rows], columns=REPORT_COLUMNS)


def emit_report(entries: Sequence[ReportEntry], fmt: ReportFormat = ReportFormat.csv) -> bytes:
    """
    Serialize report rows with the columns
    label,red,green,blue,red_ratio,green_ratio,blue_ratio.

    Entries may be ReportRow objects, (summary, comparison) pairs, or bare
    summaries (which compare with themselves).
    """
    if not entries:
        raise EmptyInput("a report needs at least one row")
    rows = [_as_row(entry) for entry in entries]
    if ReportFormat(fmt) == ReportFormat.json:
        return encode_json([row.model_dump() for row in rows])
    return convert_df(report_frame(rows))


def parse_report(data: bytes, fmt: ReportFormat = ReportFormat.csv) -> List[ReportRow]:
    """Inverse of emit_report."""
    if ReportFormat(fmt) == ReportFormat.json:
        try:
            records = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise MalformedHeader(f"report is not valid JSON: {e}") from e
        if not isinstance(records, list):
            raise MalformedHeader("a JSON report must be an array of rows")
    else:
        try:
            df = read_csv_bytes(data, dtype={"label": str}, keep_default_na=False)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise MalformedHeader(f"report is not valid CSV: {e}") from e
        if list(df.columns) != REPORT_COLUMNS:
            raise MalformedHeader(f"unexpected report columns {list(df.columns)}")
        records = to_jsonable(df.to_dict(orient="records"))
    if not records:
        raise EmptyInput("report has no rows")
    logger.debug("Parsed report rows=%s format=%s", len(records), ReportFormat(fmt).value)
    return [ReportRow.model_validate(record) for record in records]
