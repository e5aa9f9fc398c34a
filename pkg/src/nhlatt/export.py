"""
Table output. CSV files carry a header row, '.' decimals with 17
significant digits and LF line endings; the run inputs go to a
``<name>.meta.json`` file next to them. JSON files hold one object with
"meta" and "rows".
"""

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Literal, Sequence

import numpy as np
from pydantic import BaseModel

from . import __version__
from .errors import ExportError, InvalidParameterError

TableFormat = Literal["csv", "json"]


class TableSchema(BaseModel):
    name: str
    columns: list[str]


RTA_SCHEMA = TableSchema(
    name="rta",
    columns=["gamma", "k", "R", "T", "A", "t_obs", "norm_final", "absorbed_integral"],
)


def spectrum_schema(L: int | None = None) -> TableSchema:
    columns = ["index", "re_lambda", "im_lambda"]
    if L:
        columns += [f"occ_{j}" for j in range(1, L + 1)]
    return TableSchema(name="spectrum", columns=columns)


SWEEP_SCHEMA = TableSchema(name="sweep", columns=["gamma", "branch", "re_lambda", "im_lambda", "ambiguous"])
SERIES_SCHEMA = TableSchema(name="occupancy_series", columns=["t", "j", "occupancy"])
PROFILE_SCHEMA = TableSchema(name="bound_state_profile", columns=["j", "occupancy"])
GAMMA_V_SCHEMA = TableSchema(name="gamma_v", columns=["gamma", "V", "infinite_chain_V"])
GAMMA_STAR_SCHEMA = TableSchema(name="gamma_star", columns=["k", "gamma_star", "lattice_law", "continuum"])
Q_SCAN_SCHEMA = TableSchema(name="q_scan", columns=["q", "gamma_c", "parity", "above_two"])
EP_PAIRS_SCHEMA = TableSchema(
    name="ep_pairs",
    columns=["gamma_c", "i", "j", "re_center", "im_center", "gap", "vector_overlap", "is_ep"],
)
CLASSIFY_SCHEMA = TableSchema(name="ep_class", columns=["L", "q", "classification", "gamma_c", "gamma_1"])
CONTINUUM_SCHEMA = TableSchema(
    name="continuum",
    columns=["gamma", "R", "T", "A", "lattice_R", "lattice_T", "lattice_A"],
)


def profiles_schema(L: int) -> TableSchema:
    columns = ["index", "re_lambda", "im_lambda", "participation_ratio", "nodes"]
    return TableSchema(name="profiles", columns=columns + [f"occ_{j}" for j in range(1, L + 1)])


def format_value(value: Any) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _check_rows(rows: Sequence[Sequence[Any]], schema: TableSchema):
    width = len(schema.columns)
    for n, row in enumerate(rows):
        if len(row) != width:
            raise InvalidParameterError(
                f"row {n} has {len(row)} values but schema '{schema.name}' has {width} columns"
            )


def render_csv(rows: Sequence[Sequence[Any]], schema: TableSchema) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(schema.columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def render_json(rows: Sequence[Sequence[Any]], schema: TableSchema, meta: dict[str, Any]) -> str:
    document = {
        "meta": {"schema": schema.name, "version": __version__, **meta},
        "rows": [
            {c: _json_value(v) for c, v in zip(schema.columns, row)} for row in rows
        ],
    }
    return json.dumps(document, indent=2, default=str) + "\n"


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise ExportError(path, e.strerror or str(e)) from e


def write_table(
    rows: Iterable[Sequence[Any]],
    schema: TableSchema,
    format: TableFormat = "csv",
    path: Path | None = None,
    meta: dict[str, Any] | None = None,
) -> None:
    """Write rows in the schema's column order to ``path``, or stdout if None."""
    rows = [tuple(r) for r in rows]
    _check_rows(rows, schema)
    meta = meta or {}

    if format == "json":
        text = render_json(rows, schema, meta)
    elif format == "csv":
        text = render_csv(rows, schema)
    else:
        raise InvalidParameterError(f"unknown table format: {format}")

    if path is None:
        sys.stdout.write(text)
        return
    path = Path(path)
    _write(path, text)
    if format == "csv":
        sidecar = {"schema": schema.name, "version": __version__, **meta}
        _write(meta_path(path), json.dumps(sidecar, indent=2, default=str) + "\n")


def meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _parse(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path: Path, format: TableFormat | None = None) -> tuple[list[str], list[list[Any]]]:
    """Columns and rows of a table written by write_table."""
    path = Path(path)
    format = format or ("json" if path.suffix == ".json" else "csv")
    with open(path, "r", encoding="utf-8", newline="") as f:
        if format == "json":
            document = json.load(f)
            rows = document["rows"]
            columns = list(rows[0].keys()) if rows else []
            return columns, [[row[c] for c in columns] for row in rows]
        reader = csv.reader(f)
        columns = next(reader)
        return columns, [[_parse(v) for v in row] for row in reader]
