"""CSV/JSON artifact writing: atomic files, manifest hash in every header."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence


def fmt(value) -> str:
    if isinstance(value, (bool,)) or type(value).__name__ == "bool_":
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def manifest_hash(manifest: dict) -> str:
    """SHA-256 of the manifest without its output directory."""
    data = {k: v for k, v in manifest.items() if k != "out"}
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def atomic_write(path: Path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, comments=()):
    atomic_write(Path(path), render_csv(columns, rows, comments))


def write_manifest(path, manifest: dict):
    atomic_write(Path(path), json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_csv(path):
    """Parse a CSV written by ``write_csv``: returns (comments, columns, rows of floats)."""
    comments, columns, rows = [], None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append([float(v) for v in line.split(",")])
    return comments, columns, rows
