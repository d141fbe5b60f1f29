# stdlib
import threading
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

# third party
import pandas as pd

_lock = threading.Lock()
_audit_log: Optional[List[Dict[str, Any]]] = None


def init_audit_log():
    """Create the process-wide stage log on first use."""
    global _audit_log
    with _lock:
        if _audit_log is None:
            _audit_log = []


def log_stage_execution(
    stage: str,
    subject: str,
    status: str = "success",
    duration_ms: Optional[float] = None,
    item_count: Optional[int] = None,
    error_message: Optional[str] = None,
) -> None:
    """
    Log a pipeline stage execution event to the audit log.

    Args:
        stage: Stage name (e.g., 'load', 'detect_focus', 'emit_report')
        subject: Input the stage ran on, usually a file name
        status: Stage status ('success' or 'failed')
        duration_ms: Wall time of the stage
        item_count: Number of items produced (pixels, rows, trials)
        error_message: Error message if status is 'failed'
    """
    init_audit_log()

    audit_entry = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "stage": stage,
        "subject": subject,
        "status": status,
        "duration_ms": duration_ms,
        "item_count": item_count,
        "error_message": error_message,
        "thread_id": threading.get_ident(),
    }

    with _lock:
        _audit_log.append(audit_entry)


def get_audit_log() -> pd.DataFrame:
    """Snapshot of the stage log, one row per stage run; timestamps parsed as UTC."""
    init_audit_log()

    with _lock:
        entries = list(_audit_log)
    if not entries:
        return pd.DataFrame()

    df = pd.DataFrame(entries)

    if "timestamp" in df.columns:
        df["timestamp"] = pd.to_datetime(df["timestamp"])

    return df


def get_audit_stats() -> Dict[str, Any]:
    """
    Totals printed by --audit.

    Returns:
        Stage count, distinct subjects, success percentage, runs per stage
        name and summed duration
    """
    df = get_audit_log()

    if df.empty:
        return {
            "total_stages": 0,
            "unique_subjects": 0,
            "success_rate": 0.0,
            "stages_by_name": {},
            "total_duration_ms": 0.0,
        }

    return {
        "total_stages": len(df),
        "unique_subjects": int(df["subject"].nunique()),
        "success_rate": float((df["status"] == "success").mean() * 100),
        "stages_by_name": {k: int(v) for k, v in df["stage"].value_counts().items()},
        "total_duration_ms": float(df["duration_ms"].fillna(0.0).sum()),
    }


def get_failed_stages() -> pd.DataFrame:
    """
    Stages that ended in failure.

    Returns:
        DataFrame of failed audit entries
    """
    df = get_audit_log()

    if df.empty:
        return pd.DataFrame()

    return df[df["status"] == "failed"].reset_index(drop=True)


def clear_audit_log() -> None:
    """Clear all entries from the audit log."""
    global _audit_log
    with _lock:
        _audit_log = []
