"""CSV storage for analysis rows."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

from .schemas import CSV_HEADER, AnalysisRow


def render_rows(rows: Iterable[AnalysisRow]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.csv_record())
    return buffer.getvalue()


def write_rows(path: str | Path, rows: Sequence[AnalysisRow]) -> Path:
    """Write rows in the given order; identical rows give byte-identical files."""

    p = Path(path).expanduser()
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(render_rows(rows), encoding="utf-8")
    return p

