"""Small shared helpers: worker limits, atomic writes, canonical JSON."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .errors import ConfigError


def worker_count() -> int:
    """Worker cap from RTH_THREADS; defaults to 1 (serial, reproducible
    timing). Results are schedule-independent either way."""
    raw = os.environ.get("RTH_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"RTH_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"RTH_THREADS must be >= 1, got {value}")
    return value


def atomic_write_bytes(path, payload: bytes):
    """Write via a temp file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace variation."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
