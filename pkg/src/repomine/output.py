"""Deterministic CSV and text writers that embed the resolved configuration."""

from __future__ import annotations

import csv
import io
import os
from typing import Iterable, Optional, Sequence

META_PREFIX = "# repomine-config: "


def _cell(v):
    if isinstance(v, float):
        if v != v:
            return ""
        return repr(round(v, 12))
    if v is None:
        return ""
    return v


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence], meta: Optional[str] = None) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    buf = io.StringIO()
    if meta is not None:
        buf.write(META_PREFIX + meta + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
    return path


def read_csv(path: str) -> tuple[Optional[str], list[dict[str, str]]]:
    """Rows of a written table plus its embedded metadata line, if any."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    meta = None
    if lines and lines[0].startswith(META_PREFIX):
        meta = lines[0][len(META_PREFIX):]
        lines = lines[1:]
    reader = csv.DictReader([ln for ln in lines if ln])
    return meta, list(reader)


def write_text(path: str, text: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
