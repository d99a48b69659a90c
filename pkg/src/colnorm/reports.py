"""Deterministic CSV/JSON tables with a metadata header."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

__all__ = ["Table", "emit_report", "read_report", "render_report", "same_table"]

MAGIC = "# colnorm-report v1"


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


def _kind(value) -> str | None:
    if value is None:
        return None
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    return "str"


def _column_types(table: Table) -> list[str]:
    types = []
    for i, name in enumerate(table.columns):
        kinds = {_kind(r[i]) for r in table.rows} - {None}
        if kinds == {"int", "float"}:
            kinds = {"float"}
        if len(kinds) > 1:
            raise TypeError(f"column {name!r} mixes types {sorted(kinds)}")
        types.append(kinds.pop() if kinds else "str")
    return types


def _render(value, kind: str) -> str:
    if value is None:
        return ""
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    return str(value)


def _parse(text: str, kind: str):
    if text == "":
        return None
    if kind == "bool":
        return text == "true"
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def _normalize(value, kind):
    if value is None:
        return None
    if kind == "float":
        return float(value)
    if kind == "int":
        return int(value)
    return value


def render_report(table: Table, fmt: str = "csv") -> str:
    types = _column_types(table)
    meta = {"version": __version__, **table.meta}
    if fmt == "json":
        doc = {
            "format": MAGIC[2:],
            "meta": meta,
            "columns": table.columns,
            "types": types,
            "rows": [[_normalize(v, k) for v, k in zip(r, types)] for r in table.rows],
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    buf.write(MAGIC + "\n")
    buf.write("# meta: " + json.dumps(meta, sort_keys=True) + "\n")
    buf.write("# types: " + ",".join(types) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for r in table.rows:
        writer.writerow([_render(v, k) for v, k in zip(r, types)])
    return buf.getvalue()


def emit_report(table: Table, path, fmt: str = "csv") -> Path:
    """Write ``table`` to ``path``; floats use their shortest round-trip repr."""
    path = Path(path)
    text = render_report(table, fmt)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def read_report(path, fmt: str | None = None) -> Table:
    path = Path(path)
    text = path.read_text()
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "csv"
    if fmt == "json":
        doc = json.loads(text)
        meta = dict(doc["meta"])
        meta.pop("version", None)
        rows = [[None if v is None else _normalize(v, k) for v, k in zip(r, doc["types"])]
                for r in doc["rows"]]
        return Table(columns=list(doc["columns"]), rows=rows, meta=meta)
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path}: not a colnorm report")
    meta = json.loads(lines[1][len("# meta: "):])
    meta.pop("version", None)
    types = lines[2][len("# types: "):].split(",")
    reader = csv.reader(lines[3:])
    columns = next(reader, [])
    if columns == [] or (len(types) == 1 and types[0] == "" and not columns):
        return Table(columns=[], meta=meta)
    rows = [[_parse(v, k) for v, k in zip(r, types)] for r in reader]
    return Table(columns=columns, rows=rows, meta=meta)


def same_table(a: Table, b: Table) -> bool:
    """Equality that treats NaN as equal to NaN."""
    if a.columns != b.columns or a.meta != b.meta or len(a.rows) != len(b.rows):
        return False
    for ra, rb in zip(a.rows, b.rows):
        for x, y in zip(ra, rb):
            if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
                continue
            if x != y or type(x) is not type(y):
                return False
    return True
