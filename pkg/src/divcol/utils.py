"""
Utility functions for logging setup, environment lookups and report output.
"""

import json
import logging
import math
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Union

import numpy as np

from .errors import ConfigError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

logger = logging.getLogger(__name__)

_configured = False


def configure_logging(level: Optional[str] = None) -> None:
    """
    Install one stderr handler on the divcol logger.

    Args:
        level: Level name; defaults to the LOG_LEVEL environment variable, then INFO
    """
    global _configured
    name = (level or os.environ.get("LOG_LEVEL", "INFO")).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        numeric = logging.INFO
    root = logging.getLogger("divcol")
    root.setLevel(numeric)
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        root.propagate = False
        _configured = True


def env_int(name: str, default: int, minimum: int = 1) -> int:
    """
    Read an integer environment variable.

    Args:
        name: Variable name
        default: Value when unset or empty
        minimum: Smallest accepted value

    Returns:
        Parsed integer

    Raises:
        ConfigError: Non-integer or too small
    """
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from e
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


@dataclass
class Timing:
    label: str
    elapsed_ms: int = 0


@contextmanager
def timed(label: str, log: Optional[logging.Logger] = None) -> Iterator[Timing]:
    """
    Measure wall time of a block with a monotonic clock.

    The elapsed milliseconds are set on the yielded Timing when the block
    exits and logged at INFO, also when it raises.
    """
    timing = Timing(label)
    start = time.perf_counter()
    try:
        yield timing
    finally:
        timing.elapsed_ms = int(round((time.perf_counter() - start) * 1000))
        (log or logger).info("%s took %d ms", label, timing.elapsed_ms)


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json_report(path: Union[str, Path], data: Dict[str, Any]) -> Path:
    """
    Write a report as sorted, indented JSON.

    Args:
        path: Output file
        data: Report dictionary

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(to_jsonable(data), handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")
