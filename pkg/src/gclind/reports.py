"""Machine-readable output documents: CSV tables and JSON reports.

Every CSV starts with a comment line recording the tool version and the
config hash, followed by a header row.  Floats are written with ``repr`` so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .version import __version__


def config_hash(data: dict) -> str:
    """Short hash of the canonicalized config content (order-independent)."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(canonical).hexdigest()[:12]


def _cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_document(header: Sequence[str], rows: Iterable[Sequence], cfg_hash: str) -> str:
    lines = [f"# gclind {__version__} config_hash={cfg_hash}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def json_document(report: dict, cfg_hash: str) -> str:
    body = {"tool_version": __version__, "config_hash": cfg_hash}
    body.update(report)
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class OutputDoc:
    """One output file: name, full text content, and media type."""

    filename: str
    content: str
    media_type: str = "text/plain"
