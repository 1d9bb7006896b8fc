"""
utils.py
--------
Shared utilities: logger, run ids, trace records, error types and the JSON
helpers used by the CLI and the report writer.
"""
import hashlib
import json
import logging
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from src.config.settings import LOG_DIR, SIGNIFICANT_DIGITS

_PACKAGE_LOGGER = "src"
_FORMAT = "[%(asctime)s] [%(name)s] %(levelname)s :: %(message)s"


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------
class DiscordError(ValueError):
    """Base class for every domain error raised by the toolkit."""


class InvalidStateError(DiscordError):
    """Matrix is not a density operator (Hermiticity, trace, dimension, spectrum)."""


class PreconditionError(DiscordError):
    """Input is valid but outside the subspace an operation is defined on."""


class ArgumentError(DiscordError):
    """Argument out of range or inconsistent with another argument."""


class ResourceLimitError(DiscordError):
    """Requested computation exceeds a configured size cap."""


class InconsistencyError(DiscordError):
    """Optimizer output is unphysical (e.g. |max C| > 1)."""


class UsageError(DiscordError):
    """Malformed input file or command-line usage."""


# ---------------------------------------------------------------------------
# Logger
# ---------------------------------------------------------------------------
def get_logger(name: str, run_id: str | None = None) -> logging.Logger:
    """
    Return a logger under the package namespace.

    Handlers live on the package logger only: a console handler is attached
    once, and passing a run_id additionally attaches logs/<run_id>.log so
    every module's records for that run land in one file.
    """
    base = logging.getLogger(_PACKAGE_LOGGER)
    fmt = logging.Formatter(_FORMAT)

    if not any(getattr(h, "_discord_console", False) for h in base.handlers):
        base.setLevel(logging.DEBUG)
        ch = logging.StreamHandler()
        ch.setLevel(logging.INFO)
        ch.setFormatter(fmt)
        ch._discord_console = True
        base.addHandler(ch)

    if run_id is not None:
        log_path = Path(LOG_DIR) / f"{run_id}.log"
        if not any(getattr(h, "_discord_run_id", None) == run_id for h in base.handlers):
            log_path.parent.mkdir(parents=True, exist_ok=True)
            fh = logging.FileHandler(log_path, encoding="utf-8")
            fh.setLevel(logging.DEBUG)
            fh.setFormatter(fmt)
            fh._discord_run_id = run_id
            base.addHandler(fh)

    if name == _PACKAGE_LOGGER or name.startswith(_PACKAGE_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{_PACKAGE_LOGGER}.{name}")


def release_run_handlers(run_id: str) -> None:
    """Close and detach the file handler a run attached (keeps long test sessions tidy)."""
    base = logging.getLogger(_PACKAGE_LOGGER)
    for handler in list(base.handlers):
        if getattr(handler, "_discord_run_id", None) == run_id:
            base.removeHandler(handler)
            handler.close()


# ---------------------------------------------------------------------------
# Run ID Generator
# ---------------------------------------------------------------------------
def make_run_id() -> str:
    """Generate a unique RunID for each CLI invocation."""
    ts = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    short_uuid = str(uuid.uuid4())[:8]
    return f"QD-{ts}-{short_uuid}"


def log_trace(run_id: str, record: dict[str, Any]) -> None:
    """Append one structured trace record to logs/<run_id>_traces.jsonl."""
    trace = {
        "run_id": run_id,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        **record,
    }
    trace_path = Path(LOG_DIR) / f"{run_id}_traces.jsonl"
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    with open(trace_path, "a", encoding="utf-8") as f:
        f.write(json.dumps(to_jsonable(trace)) + "\n")


# ---------------------------------------------------------------------------
# JSON Helpers
# ---------------------------------------------------------------------------
def load_json(path: str | Path) -> Any:
    """Read a JSON file, mapping missing files and parse failures to UsageError."""
    p = Path(path)
    if not p.exists():
        raise UsageError(f"Input file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"Could not parse {p} as JSON: {exc}") from exc


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def round_sig(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """Round every float inside a nested structure to `digits` significant digits."""
    value = to_jsonable(value)
    if isinstance(value, dict):
        return {k: round_sig(v, digits) for k, v in value.items()}
    if isinstance(value, list):
        return [round_sig(v, digits) for v in value]
    if isinstance(value, float):
        if not np.isfinite(value):
            return None
        return float(f"{value:.{digits}g}")
    return value


def dumps_rounded(value: Any, digits: int = SIGNIFICANT_DIGITS) -> str:
    return json.dumps(round_sig(value, digits), indent=2)


def sha256_file(path: str | Path) -> str:
    """Hex digest of a file's bytes, used for run manifests."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            h.update(block)
    return h.hexdigest()
