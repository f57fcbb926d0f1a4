"""Deterministic CSV / JSON / text rendering of result tables."""

from __future__ import annotations

import csv
import io
import json
from typing import Any, Sequence


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def to_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_json(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    return dump_json([dict(zip(header, row)) for row in rows])


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def to_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    def show(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return _cell(v)

    cells = [list(header)] + [[show(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


RENDERERS = {"csv": to_csv, "json": to_json, "text": to_text}


def render(fmt: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    return RENDERERS[fmt](header, rows)
