"""Classic synopsis constructors: reservoir sample, equi-width histogram,
Haar wavelet, count-min sketch, plus the wrapper for generated tables.

All synopses are immutable after construction, carry enough provenance to
reproduce themselves (seeds, parameters) and persist through the envelope
format.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import io as io_mod
from .model import Table, TableSchema, is_discrete_kind, is_numeric_kind

_MASK64 = (1 << 64) - 1


class SynopsisError(ValueError):
    """Raised for invalid synopsis parameters."""


# ---------------------------------------------------------------------------
# reservoir sample


@dataclass
class SampleSynopsis:
    envelope_kind = "synopsis.sample"

    table: Table
    population: int
    sample_size: int
    seed: int

    @property
    def scale(self) -> float:
        return self.population / self.table.n_rows

    def to_payload(self) -> dict:
        return {
            "schema": io_mod.SchemaConfig.from_schema(self.table.schema).to_dict(),
            "rows": [_jsonable_row(r) for r in self.table.rows()],
            "population": self.population,
            "sample_size": self.sample_size,
            "seed": self.seed,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SampleSynopsis":
        schema = io_mod.SchemaConfig.from_dict(payload["schema"]).to_schema()
        names = schema.names
        rows = payload["rows"]
        columns = {n: [row[i] for row in rows] for i, n in enumerate(names)}
        return cls(
            Table(schema, columns),
            population=int(payload["population"]),
            sample_size=int(payload["sample_size"]),
            seed=int(payload["seed"]),
        )


def _jsonable_row(row):
    return [v for v in row]


def reservoir_sample(table: Table, k: int, seed: int = 0) -> SampleSynopsis:
    """Algorithm R over the rows streamed in order.

    Equivalent to the classic one-pass loop: row i (0-based, i >= k) draws
    j uniform on [0, i] and replaces reservoir slot j when j < k. When the
    table has at most k rows the sample is the whole table.
    """
    if k < 1:
        raise SynopsisError("sample size k must be at least 1")
    n = table.n_rows
    if n <= k:
        return SampleSynopsis(table, population=n, sample_size=n, seed=seed)
    rng = np.random.default_rng(seed)
    reservoir = np.arange(k)
    draws = rng.integers(0, np.arange(k, n) + 1)
    for offset in np.nonzero(draws < k)[0]:
        reservoir[draws[offset]] = k + offset
    return SampleSynopsis(
        table.take(reservoir.tolist()), population=n, sample_size=k, seed=seed
    )


# ---------------------------------------------------------------------------
# equi-width histogram


@dataclass
class NumericHistogram:
    lo: float
    hi: float
    counts: np.ndarray  # per-bucket row counts
    sums: np.ndarray  # per-bucket value sums
    nulls: int

    @property
    def n_buckets(self) -> int:
        return len(self.counts)

    @property
    def bucket_width(self) -> float:
        return (self.hi - self.lo) / self.n_buckets if self.hi > self.lo else 0.0

    def edges(self, b: int) -> tuple[float, float]:
        w = self.bucket_width
        return self.lo + b * w, self.hi if b == self.n_buckets - 1 else self.lo + (b + 1) * w


@dataclass
class CategoryCounts:
    counts: dict[str, int]
    nulls: int


@dataclass
class HistogramSynopsis:
    envelope_kind = "synopsis.histogram"

    schema: TableSchema
    row_count: int
    numeric: dict[str, NumericHistogram]
    categorical: dict[str, CategoryCounts]

    def to_payload(self) -> dict:
        return {
            "schema": io_mod.SchemaConfig.from_schema(self.schema).to_dict(),
            "row_count": self.row_count,
            "numeric": {
                name: {
                    "lo": h.lo,
                    "hi": h.hi,
                    "counts": [int(c) for c in h.counts],
                    "sums": [float(s) for s in h.sums],
                    "nulls": h.nulls,
                }
                for name, h in self.numeric.items()
            },
            "categorical": {
                name: {"counts": c.counts, "nulls": c.nulls}
                for name, c in self.categorical.items()
            },
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "HistogramSynopsis":
        schema = io_mod.SchemaConfig.from_dict(payload["schema"]).to_schema()
        numeric = {
            name: NumericHistogram(
                lo=float(doc["lo"]),
                hi=float(doc["hi"]),
                counts=np.array(doc["counts"], dtype=np.int64),
                sums=np.array(doc["sums"], dtype=np.float64),
                nulls=int(doc["nulls"]),
            )
            for name, doc in payload["numeric"].items()
        }
        categorical = {
            name: CategoryCounts(
                {k: int(v) for k, v in doc["counts"].items()}, int(doc["nulls"])
            )
            for name, doc in payload["categorical"].items()
        }
        return cls(schema, int(payload["row_count"]), numeric, categorical)


def build_histogram(table: Table, n_buckets: int) -> HistogramSynopsis:
    """Equal-width buckets per numeric column, category counts per
    discrete column. Buckets are half-open [lo, hi) with the last bucket
    closed; a constant column degenerates to a single bucket.
    """
    if n_buckets < 1:
        raise SynopsisError("need at least one bucket")
    numeric: dict[str, NumericHistogram] = {}
    categorical: dict[str, CategoryCounts] = {}
    for col in table.schema:
        if is_numeric_kind(col.kind):
            values = table.numeric(col.name)
            nulls = int(np.isnan(values).sum())
            vals = values[~np.isnan(values)]
            if vals.size == 0:
                numeric[col.name] = NumericHistogram(
                    0.0, 0.0, np.zeros(1, dtype=np.int64), np.zeros(1), nulls
                )
                continue
            lo, hi = float(vals.min()), float(vals.max())
            if lo == hi:
                numeric[col.name] = NumericHistogram(
                    lo, hi, np.array([vals.size], dtype=np.int64),
                    np.array([float(vals.sum())]), nulls,
                )
                continue
            width = (hi - lo) / n_buckets
            idx = np.minimum(
                ((vals - lo) / width).astype(int), n_buckets - 1
            )  # max value joins the last bucket
            counts = np.bincount(idx, minlength=n_buckets).astype(np.int64)
            sums = np.bincount(idx, weights=vals, minlength=n_buckets)
            numeric[col.name] = NumericHistogram(lo, hi, counts, sums, nulls)
        elif is_discrete_kind(col.kind):
            cells = table.column(col.name)
            counts: dict[str, int] = {c: 0 for c in col.kind.categories}
            nulls = 0
            for v in cells:
                if v is None:
                    nulls += 1
                else:
                    counts[v] += 1
            categorical[col.name] = CategoryCounts(counts, nulls)
    return HistogramSynopsis(table.schema, table.n_rows, numeric, categorical)


# ---------------------------------------------------------------------------
# Haar wavelet


def haar_transform(values: Sequence[float]) -> np.ndarray:
    """Orthonormal Haar transform of the zero-padded-to-power-of-two input."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise SynopsisError("empty input")
    size = 1 << max(int(np.ceil(np.log2(x.size))), 0)
    buf = np.zeros(size)
    buf[: x.size] = x
    out = buf.copy()
    length = size
    while length > 1:
        half = length // 2
        evens = out[0:length:2].copy()
        odds = out[1:length:2].copy()
        out[:half] = (evens + odds) / np.sqrt(2.0)
        out[half:length] = (evens - odds) / np.sqrt(2.0)
        length = half
    return out


def haar_inverse(coeffs: np.ndarray) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64).copy()
    size = c.size
    length = 2
    while length <= size:
        half = length // 2
        approx = c[:half].copy()
        detail = c[half:length].copy()
        c[0:length:2] = (approx + detail) / np.sqrt(2.0)
        c[1:length:2] = (approx - detail) / np.sqrt(2.0)
        length *= 2
    return c


@dataclass
class WaveletColumn:
    indices: np.ndarray
    coefficients: np.ndarray
    length: int  # original (pre-padding) length
    padded: int


@dataclass
class WaveletSynopsis:
    envelope_kind = "synopsis.wavelet"

    schema: TableSchema
    row_count: int
    columns: dict[str, WaveletColumn]

    def to_payload(self) -> dict:
        return {
            "schema": io_mod.SchemaConfig.from_schema(self.schema).to_dict(),
            "row_count": self.row_count,
            "columns": {
                name: {
                    "indices": [int(i) for i in wc.indices],
                    "coefficients": io_mod.encode_array(wc.coefficients),
                    "length": wc.length,
                    "padded": wc.padded,
                }
                for name, wc in self.columns.items()
            },
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "WaveletSynopsis":
        schema = io_mod.SchemaConfig.from_dict(payload["schema"]).to_schema()
        columns = {
            name: WaveletColumn(
                indices=np.array(doc["indices"], dtype=np.int64),
                coefficients=io_mod.decode_array(doc["coefficients"]),
                length=int(doc["length"]),
                padded=int(doc["padded"]),
            )
            for name, doc in payload["columns"].items()
        }
        return cls(schema, int(payload["row_count"]), columns)


def wavelet_build(values: Sequence[float], k_keep: int) -> WaveletColumn:
    """Keep the k largest-magnitude orthonormal Haar coefficients
    (ties break toward the lower index)."""
    if k_keep < 1:
        raise SynopsisError("k_keep must be at least 1")
    coeffs = haar_transform(values)
    n = len(np.asarray(values))
    order = np.argsort(-np.abs(coeffs), kind="stable")
    keep = np.sort(order[: min(k_keep, coeffs.size)])
    return WaveletColumn(
        indices=keep, coefficients=coeffs[keep], length=n, padded=coeffs.size
    )


def wavelet_reconstruct(wc: WaveletColumn) -> np.ndarray:
    full = np.zeros(wc.padded)
    full[wc.indices] = wc.coefficients
    return haar_inverse(full)[: wc.length]


def build_wavelet(table: Table, k_keep: int) -> WaveletSynopsis:
    """Wavelet column per numeric column, built over non-null values."""
    columns = {}
    for col in table.schema.numeric_columns():
        values = table.numeric(col.name)
        vals = values[~np.isnan(values)]
        if vals.size == 0:
            continue
        columns[col.name] = wavelet_build(vals, k_keep)
    if not columns:
        raise SynopsisError("table has no numeric columns to compress")
    return WaveletSynopsis(table.schema, table.n_rows, columns)


# ---------------------------------------------------------------------------
# count-min sketch


def _token_key(item) -> int:
    """Stable 64-bit key for a cell value (process-independent)."""
    if isinstance(item, float):
        text = repr(item)
    else:
        text = str(item)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class SketchSynopsis:
    envelope_kind = "synopsis.sketch"

    schema: TableSchema
    column: str
    depth: int
    width: int
    seed: int
    multipliers: tuple[int, ...] = field(repr=False, default=())
    offsets: tuple[int, ...] = field(repr=False, default=())
    matrix: np.ndarray = field(repr=False, default=None)
    total: int = 0
    row_count: int = 0

    def to_payload(self) -> dict:
        return {
            "schema": io_mod.SchemaConfig.from_schema(self.schema).to_dict(),
            "column": self.column,
            "depth": self.depth,
            "width": self.width,
            "seed": self.seed,
            "multipliers": [str(a) for a in self.multipliers],
            "offsets": [str(b) for b in self.offsets],
            "matrix": [[int(v) for v in row] for row in self.matrix],
            "total": self.total,
            "row_count": self.row_count,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SketchSynopsis":
        return cls(
            schema=io_mod.SchemaConfig.from_dict(payload["schema"]).to_schema(),
            column=payload["column"],
            depth=int(payload["depth"]),
            width=int(payload["width"]),
            seed=int(payload["seed"]),
            multipliers=tuple(int(a) for a in payload["multipliers"]),
            offsets=tuple(int(b) for b in payload["offsets"]),
            matrix=np.array(payload["matrix"], dtype=np.int64),
            total=int(payload["total"]),
            row_count=int(payload["row_count"]),
        )

    def bucket(self, row: int, item) -> int:
        key = _token_key(item)
        h = (self.multipliers[row] * key + self.offsets[row]) & _MASK64
        return (h * self.width) >> 64


def cms_insert_all(items, width: int, depth: int, seed: int = 0,
                   schema: Optional[TableSchema] = None,
                   column: str = "") -> SketchSynopsis:
    """Build a count-min sketch over the item stream (nulls are skipped).

    Hashing is 64-bit multiply-shift with per-row odd multipliers, mapped
    to [0, width) by fixed-point scaling.
    """
    if width < 2:
        raise SynopsisError("width must be at least 2")
    if depth < 1:
        raise SynopsisError("depth must be at least 1")
    rng = np.random.default_rng(seed)
    multipliers = tuple(int(rng.integers(1, 1 << 63)) * 2 + 1 for _ in range(depth))
    offsets = tuple(int(rng.integers(0, 1 << 63)) for _ in range(depth))
    syn = SketchSynopsis(
        schema=schema if schema is not None else TableSchema(()),
        column=column,
        depth=depth,
        width=width,
        seed=seed,
        multipliers=multipliers,
        offsets=offsets,
        matrix=np.zeros((depth, width), dtype=np.int64),
        total=0,
        row_count=0,
    )
    for item in items:
        syn.row_count += 1
        if item is None:
            continue
        for r in range(depth):
            syn.matrix[r, syn.bucket(r, item)] += 1
        syn.total += 1
    return syn


def cms_query(syn: SketchSynopsis, item) -> int:
    """Frequency estimate: min over rows, never below the true count."""
    return int(min(syn.matrix[r, syn.bucket(r, item)] for r in range(syn.depth)))


def build_sketch(table: Table, column: str, width: int, depth: int,
                 seed: int = 0) -> SketchSynopsis:
    col = table.schema.column(column)
    return cms_insert_all(
        table.column(column), width, depth, seed, schema=table.schema, column=column
    )


# ---------------------------------------------------------------------------
# generated-table wrapper


@dataclass
class GeneratedSynopsis:
    envelope_kind = "synopsis.generated"

    table: Table
    population: int

    @property
    def scale(self) -> float:
        return self.population / self.table.n_rows

    def to_payload(self) -> dict:
        return {
            "schema": io_mod.SchemaConfig.from_schema(self.table.schema).to_dict(),
            "rows": [_jsonable_row(r) for r in self.table.rows()],
            "population": self.population,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "GeneratedSynopsis":
        schema = io_mod.SchemaConfig.from_dict(payload["schema"]).to_schema()
        names = schema.names
        rows = payload["rows"]
        columns = {n: [row[i] for row in rows] for i, n in enumerate(names)}
        return cls(Table(schema, columns), population=int(payload["population"]))


Synopsis = (SampleSynopsis, HistogramSynopsis, WaveletSynopsis, SketchSynopsis,
            GeneratedSynopsis)

io_mod.register_loader("synopsis.sample")(SampleSynopsis.from_payload)
io_mod.register_loader("synopsis.histogram")(HistogramSynopsis.from_payload)
io_mod.register_loader("synopsis.wavelet")(WaveletSynopsis.from_payload)
io_mod.register_loader("synopsis.sketch")(SketchSynopsis.from_payload)
io_mod.register_loader("synopsis.generated")(GeneratedSynopsis.from_payload)
