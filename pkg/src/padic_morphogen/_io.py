"""Atomic file writers and number formatting shared by all exporters."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

PARTIAL_SUFFIX = ".partial"


def fmt(x) -> str:
    """Format a number for CSV with 17 significant digits (round-trips doubles)."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return f"{float(x):.17g}"


def write_bytes(path, data: bytes) -> Path:
    """Write to ``path + '.partial'`` then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + PARTIAL_SUFFIX)
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return path


def write_text(path, text: str) -> Path:
    return write_bytes(path, text.encode("utf-8"))


def write_json(path, obj) -> Path:
    return write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) if isinstance(x, float) else x for x in row])
    return write_text(path, buf.getvalue())
