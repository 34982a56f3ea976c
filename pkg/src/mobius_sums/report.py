"""CSV and json serialization with byte-stable output.

Reals are written with 17 significant digits (round-trip safe), '.' as the
decimal separator and no grouping.  json output sorts keys.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from typing import Any, Iterable, Sequence


def format_real(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return repr(v)
    return format(v, ".17g")


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_real(v)
    return str(v)


def to_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _plain(obj: Any) -> Any:
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def to_json(payload: Any) -> str:
    return json.dumps(_plain(payload), indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_text(text: str, path: str | None) -> None:
    """Write to ``path``, or to standard output when path is None or '-'."""
    if path is None or path == "-":
        import sys

        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
