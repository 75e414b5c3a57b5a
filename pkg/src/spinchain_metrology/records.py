"""Tabular sweep output: CSV and JSON writers with bit-exact round-trip.

CSV files carry the resolved run configuration as leading ``#`` comment
lines, then one header row, then data rows with floats printed in 17
significant digit scientific notation.  JSON files carry the same records
under a ``records`` key with the configuration echoed under ``config``;
floats use the shortest round-trip representation.  Parsing either file
recovers bit-identical float64 values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = ["SweepRecord", "SWEEP_COLUMNS", "write_table", "read_table", "records_to_rows"]

SWEEP_COLUMNS = ["model", "N", "J", "h", "gamma", "beta", "quantity", "value", "provenance"]


@dataclass(frozen=True)
class SweepRecord:
    model: str
    n: int
    j: float
    h: float
    gamma: float
    beta: float
    quantity: str
    value: float
    provenance: str
    estimator: str | None = None


def records_to_rows(records) -> tuple[list, list]:
    """Column names and row dicts for a record list.

    The ``estimator`` column appears only when at least one record has one,
    so each command keeps a fixed schema.
    """
    with_est = any(r.estimator is not None for r in records)
    cols = list(SWEEP_COLUMNS) + (["estimator"] if with_est else [])
    rows = []
    for r in records:
        row = {
            "model": r.model,
            "N": r.n,
            "J": r.j,
            "h": r.h,
            "gamma": r.gamma,
            "beta": r.beta,
            "quantity": r.quantity,
            "value": r.value,
            "provenance": r.provenance,
        }
        if with_est:
            row["estimator"] = r.estimator or ""
        rows.append(row)
    return cols, rows


def _format_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".16e")
    return str(v)


def write_table(path, fmt: str, columns, rows, config: dict) -> None:
    """Write rows (list of dicts) as csv or json with a config echo."""
    if fmt == "csv":
        lines = []
        for key in sorted(config):
            lines.append(f"# {key} = {json.dumps(config[key], sort_keys=True)}")
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_format_cell(row[c]) for c in columns))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "json":
        payload = {"config": config, "columns": list(columns), "records": rows}
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")


def _parse_cell(s: str):
    if s == "true":
        return True
    if s == "false":
        return False
    try:
        i = int(s)
        return i
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path):
    """Parse a file written by write_table; returns (config, columns, rows)."""
    text = open(path).read()
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        return payload["config"], payload["columns"], payload["records"]
    config = {}
    columns = None
    rows = []
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            config[key.strip()] = json.loads(val.strip())
            continue
        cells = line.split(",")
        if columns is None:
            columns = cells
            continue
        rows.append({c: _parse_cell(v) for c, v in zip(columns, cells)})
    return config, columns, rows
