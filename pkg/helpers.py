# stdlib
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Union

# third party
import numpy as np
import pandas as pd

LOG_FORMAT = "[%(asctime)s] %(levelname)s %(name)s - %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

_loggers: Dict[str, logging.Logger] = {}
_log_level = logging.INFO


def get_logger(name: str) -> logging.Logger:
    """Module logger writing single-line records to stderr."""
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT, LOG_DATE_FORMAT))
        logger.addHandler(handler)
        logger.propagate = False
    logger.setLevel(_log_level)
    _loggers[name] = logger
    return logger


def set_log_level(level: Union[int, str]) -> None:
    global _log_level
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            raise ValueError(f"unknown log level {level!r}")
    _log_level = level
    for logger in _loggers.values():
        logger.setLevel(level)


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays nested in dicts and lists to plain Python."""
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def encode_json(data: Any) -> bytes:
    """Serialize to the indented JSON form every artifact uses."""
    return (json.dumps(to_jsonable(data), indent=2) + "\n").encode("utf-8")


def convert_df(df: pd.DataFrame, index: bool = False) -> bytes:
    return df.to_csv(index=index, lineterminator="\n").encode("utf8")


def read_csv_bytes(data: bytes, **kwargs) -> pd.DataFrame:
    return pd.read_csv(io.BytesIO(data), float_precision="round_trip", **kwargs)


def atomic_write_bytes(path: Union[str, Path], data: bytes) -> Path:
    """Write ``data`` to a temporary sibling of ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def write_artifacts(out_dir: Union[str, Path], artifacts: Dict[str, bytes]) -> List[Path]:
    """Atomically write every named artifact into ``out_dir`` in name order."""
    out_dir = Path(out_dir)
    return [atomic_write_bytes(out_dir / name, artifacts[name]) for name in sorted(artifacts)]
