"""Result persistence: one JSON record per line plus flat CSV tables.

CSV files are UTF-8 with a header row; floats are written with ``repr`` so
they parse back to the identical double. Empty tables still get a header.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

from .errors import SparseLabError
from .experiments import SCHEMA, ResultRecord

TABLE_COLUMNS = {
    "phase_diagram": ["lambda", "ratio", "region"],
    "params_checks": ["inequality", "lhs", "rhs", "ok"],
    "growth": ["label", "lambda", "rationality", "excluded", "inside_I", "J", "samples", "rate_mean",
               "rate_stderr", "target", "rel_error", "angle_depth", "short_depth", "disc_short_mean",
               "disc_long_mean", "frac_long_below_short"],
    "growth_samples": ["label", "sample", "rate"],
    "spectrum": ["atom", "weight"],
    "dimension": ["label", "lambda0", "inside_I", "alpha_hat", "alpha_target", "residual", "samples",
                  "spacing_floor", "scale_min", "scale_max"],
    "dimension_masses": ["label", "scale", "mass"],
    "decay": ["label", "lambda0", "half_width", "samples", "exponent_hat", "target", "C_hat", "T_min",
              "T_max", "residual", "heis_time"],
    "decay_curves": ["label", "T", "I"],
    "kronecker": ["theta", "central_half_width", "bins", "stability", "l2_tail_slope", "l2_T_max",
                  "outer_threshold", "outer_max_atom_N", "outer_max_atom_2N", "outer_ratio"],
    "kronecker_density": ["theta", "center", "density"],
}


class PersistenceError(SparseLabError, OSError):
    pass


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(text):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def write_csv(path, rows, columns=None):
    path = Path(path)
    columns = columns or (list(rows[0]) if rows else [])
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r.get(c)) for c in columns])
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc


def dumps(record: ResultRecord) -> str:
    return json.dumps(asdict(record), sort_keys=True, allow_nan=False)


def loads(line: str) -> ResultRecord:
    d = json.loads(line)
    if d.get("schema") != SCHEMA:
        raise PersistenceError(f"unsupported schema {d.get('schema')!r}, expected {SCHEMA!r}")
    return ResultRecord(**d)


def payload_bytes(record: ResultRecord) -> bytes:
    """Canonical bytes of the numeric payload (no timing metadata)."""
    return json.dumps(record.numeric_payload(), sort_keys=True, allow_nan=False).encode()


def emit(record: ResultRecord, out_dir, tables=None) -> list:
    """Write ``record.jsonl`` and one CSV per table; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PersistenceError(f"cannot create output directory {out}: {exc}") from exc
    paths = []
    jl = out / "record.jsonl"
    try:
        jl.write_text(dumps(record) + "\n", encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot write {jl}: {exc}") from exc
    paths.append(jl)
    for name in tables if tables is not None else record.tables:
        rows = record.tables.get(name, [])
        paths.append(write_csv(out / f"{name}.csv", rows, TABLE_COLUMNS.get(name)))
    return paths


def parse_jsonl(path) -> list:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    return [loads(line) for line in lines if line.strip()]
