"""CSV ingestion, schema inference/configuration, and JSON persistence.

CSV dialect: comma separated, double-quote escaping, UTF-8, LF or CRLF
line endings, first non-comment line is the header. Lines starting with
``#`` before the header are skipped (the CLI uses one to embed its run
configuration). Cells equal to the null token (default: empty string)
become nulls.

Models, synopses and reports are stored in a versioned JSON envelope
``{"format_version": 1, "kind": ..., "payload": ...}`` with base64-encoded
little-endian float64 blocks for array parameters, so round trips are
bit-exact.
"""

from __future__ import annotations

import base64
import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import (
    Categorical,
    ColumnKind,
    ColumnSchema,
    Continuous,
    Mixed,
    Ordinal,
    SchemaError,
    Table,
    TableSchema,
    is_numeric_kind,
    validate_table,
)

FORMAT_VERSION = 1
DEFAULT_NULL_TOKEN = ""
DEFAULT_MIXED_THRESHOLD = 0.25


class CsvFormatError(ValueError):
    """Raised for ragged rows or unparseable cells."""


class EnvelopeError(ValueError):
    """Raised for malformed or unknown persisted envelopes."""


# ---------------------------------------------------------------------------
# schema configuration


@dataclass
class ColumnConfig:
    name: str
    kind: str  # continuous | categorical | ordinal | mixed
    categories: Optional[list[str]] = None
    bounds: Optional[tuple[float, float]] = None
    special_values: Optional[list[float]] = None
    nullable: bool = False
    target: bool = False

    def to_column_schema(self) -> ColumnSchema:
        kind: ColumnKind
        if self.kind == "continuous":
            kind = Continuous(bounds=tuple(self.bounds) if self.bounds else None)
        elif self.kind == "categorical":
            if not self.categories:
                raise SchemaError(f"column {self.name!r}: categories required")
            kind = Categorical(tuple(self.categories))
        elif self.kind == "ordinal":
            if not self.categories:
                raise SchemaError(f"column {self.name!r}: categories required")
            kind = Ordinal(tuple(self.categories))
        elif self.kind == "mixed":
            kind = Mixed(tuple(self.special_values or ()))
        else:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        return ColumnSchema(self.name, kind, nullable=self.nullable, target=self.target)


@dataclass
class SchemaConfig:
    columns: list[ColumnConfig] = field(default_factory=list)
    null_token: str = DEFAULT_NULL_TOKEN

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in config: {names}")

    def to_schema(self) -> TableSchema:
        return TableSchema(tuple(c.to_column_schema() for c in self.columns))

    @classmethod
    def from_schema(cls, schema: TableSchema, null_token: str = DEFAULT_NULL_TOKEN):
        cols = []
        for c in schema:
            if isinstance(c.kind, Continuous):
                cols.append(
                    ColumnConfig(
                        c.name,
                        "continuous",
                        bounds=tuple(c.kind.bounds) if c.kind.bounds else None,
                        nullable=c.nullable,
                        target=c.target,
                    )
                )
            elif isinstance(c.kind, Categorical):
                cols.append(
                    ColumnConfig(
                        c.name,
                        "categorical",
                        categories=list(c.kind.categories),
                        nullable=c.nullable,
                        target=c.target,
                    )
                )
            elif isinstance(c.kind, Ordinal):
                cols.append(
                    ColumnConfig(
                        c.name,
                        "ordinal",
                        categories=list(c.kind.levels),
                        nullable=c.nullable,
                        target=c.target,
                    )
                )
            elif isinstance(c.kind, Mixed):
                cols.append(
                    ColumnConfig(
                        c.name,
                        "mixed",
                        special_values=list(c.kind.special_values),
                        nullable=c.nullable,
                        target=c.target,
                    )
                )
        return cls(cols, null_token)

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            entry: dict = {"name": c.name, "kind": c.kind, "nullable": c.nullable}
            if c.categories is not None:
                entry["categories"] = list(c.categories)
            if c.bounds is not None:
                entry["bounds"] = list(c.bounds)
            if c.special_values is not None:
                entry["special_values"] = list(c.special_values)
            if c.target:
                entry["target"] = True
            cols.append(entry)
        return {"columns": cols, "null_token": self.null_token}

    @classmethod
    def from_dict(cls, doc: dict) -> "SchemaConfig":
        cols = []
        for entry in doc.get("columns", []):
            cols.append(
                ColumnConfig(
                    name=entry["name"],
                    kind=entry["kind"],
                    categories=entry.get("categories"),
                    bounds=tuple(entry["bounds"]) if entry.get("bounds") else None,
                    special_values=entry.get("special_values"),
                    nullable=bool(entry.get("nullable", False)),
                    target=bool(entry.get("target", False)),
                )
            )
        return cls(cols, doc.get("null_token", DEFAULT_NULL_TOKEN))


def load_schema_config(path) -> SchemaConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return SchemaConfig.from_dict(json.load(fh))


def save_schema_config(config: SchemaConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# CSV


def read_csv(path, config: Optional[SchemaConfig] = None,
             mixed_threshold: float = DEFAULT_MIXED_THRESHOLD) -> Table:
    """Load a CSV file into a Table, inferring the schema when no config is given."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        start += 1
    rows = list(csv.reader(lines[start:]))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise CsvFormatError(
                f"{path}: row {i + 1} has {len(row)} fields, header has {len(header)}"
            )
    if config is None:
        null_token = DEFAULT_NULL_TOKEN
        schema = infer_schema(header, body, mixed_threshold=mixed_threshold,
                              null_token=null_token)
    else:
        null_token = config.null_token
        schema = config.to_schema()
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise CsvFormatError(f"{path}: configured columns missing: {missing}")
    positions = {name: header.index(name) for name in schema.names}
    columns: dict[str, list] = {n: [] for n in schema.names}
    for i, row in enumerate(body):
        for col in schema:
            raw = row[positions[col.name]]
            if raw == null_token:
                columns[col.name].append(None)
            elif is_numeric_kind(col.kind):
                try:
                    columns[col.name].append(float(raw))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {i + 1}, column {col.name!r}: "
                        f"cannot parse {raw!r} as a number"
                    ) from None
            else:
                columns[col.name].append(raw)
    table = Table(schema, columns)
    report = validate_table(table)
    if not report.ok:
        first = report.violations[0]
        raise CsvFormatError(
            f"{path}: {len(report.violations)} schema violations, first: "
            f"column {first.column!r} row {first.row}: {first.reason}"
        )
    return table


def write_csv(table: Table, path, null_token: str = DEFAULT_NULL_TOKEN,
              header_comment: Optional[str] = None) -> None:
    """Write a Table as CSV; floats use shortest round-trip formatting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment is not None:
            fh.write("# " + header_comment + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.schema.names)
        for row in table.rows():
            writer.writerow([_format_cell(v, null_token) for v in row])


def _format_cell(v, null_token: str) -> str:
    if v is None:
        return null_token
    if isinstance(v, float):
        return repr(v)
    return str(v)


def infer_schema(header: Sequence[str], rows: Sequence[Sequence[str]],
                 mixed_threshold: float = DEFAULT_MIXED_THRESHOLD,
                 null_token: str = DEFAULT_NULL_TOKEN) -> TableSchema:
    """Infer column kinds from a raw string grid.

    A column is continuous when every non-null cell parses as a real,
    mixed when additionally a single value holds at least
    ``mixed_threshold`` of the non-null mass, categorical otherwise.
    """
    if not header:
        raise CsvFormatError("empty grid: no header")
    columns = []
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        non_null = [c for c in cells if c != null_token]
        nullable = len(non_null) < len(cells)
        values = _try_floats(non_null)
        if values is not None and len(values) > 0:
            counts: dict[float, int] = {}
            for v in values:
                counts[v] = counts.get(v, 0) + 1
            spikes = sorted(
                v for v, c in counts.items() if c / len(values) >= mixed_threshold
            )
            if spikes and len(counts) > len(spikes):
                kind: ColumnKind = Mixed(tuple(spikes))
            else:
                kind = Continuous()
            columns.append(ColumnSchema(name, kind, nullable=nullable))
        else:
            cats = tuple(sorted(set(non_null))) if non_null else ("",)
            columns.append(ColumnSchema(name, Categorical(cats), nullable=nullable))
    return TableSchema(tuple(columns))


def _try_floats(cells: Sequence[str]) -> Optional[list[float]]:
    out = []
    for c in cells:
        try:
            v = float(c)
        except ValueError:
            return None
        if not math.isfinite(v):
            return None
        out.append(v)
    return out


# ---------------------------------------------------------------------------
# JSON envelopes


def encode_array(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def decode_array(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(doc["shape"]).copy()


_LOADERS: dict[str, Callable[[dict], object]] = {}


def register_loader(kind: str):
    def deco(fn):
        _LOADERS[kind] = fn
        return fn

    return deco


def save_envelope(kind: str, payload: dict, path) -> None:
    doc = {"format_version": FORMAT_VERSION, "kind": kind, "payload": payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_envelope(path) -> tuple[str, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "kind" not in doc or "payload" not in doc:
        raise EnvelopeError(f"{path}: not a synoptic envelope")
    if doc.get("format_version") != FORMAT_VERSION:
        raise EnvelopeError(
            f"{path}: unsupported format_version {doc.get('format_version')!r}"
        )
    return doc["kind"], doc["payload"]


def persist(obj, path) -> None:
    """Save any persistable object: tables as CSV, the rest as envelopes."""
    if isinstance(obj, Table):
        write_csv(obj, path)
        return
    kind = getattr(obj, "envelope_kind", None)
    to_payload = getattr(obj, "to_payload", None)
    if kind is None or to_payload is None:
        raise TypeError(f"object of type {type(obj).__name__} is not persistable")
    save_envelope(kind, to_payload(), path)


def load(path):
    """Load an envelope file previously written by :func:`persist`."""
    kind, payload = load_envelope(path)
    loader = _LOADERS.get(kind)
    if loader is None:
        raise EnvelopeError(f"{path}: no loader registered for kind {kind!r}")
    return loader(payload)
