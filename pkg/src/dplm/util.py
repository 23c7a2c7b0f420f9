"""Small shared helpers: canonical hashing for provenance lines."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Union


def canonical_hash(obj: Any, digits: int = 12) -> str:
    """Stable short hash of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:digits]


def file_sha256(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
