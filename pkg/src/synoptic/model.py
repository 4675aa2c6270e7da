"""Typed tabular data model shared by every other module.

A table is a columnar dataset whose cells are floats (numeric columns),
string tokens (categorical/ordinal columns) or ``None`` for explicit nulls.
Tables and schemas are immutable after construction and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

Cell = Union[float, str, None]


class SchemaError(ValueError):
    """Raised when a schema or table is structurally invalid."""


@dataclass(frozen=True)
class Continuous:
    """Real-valued column, optionally bounded to a closed interval."""

    bounds: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.bounds is not None:
            lo, hi = self.bounds
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise SchemaError(f"bounds must satisfy lo < hi, got {self.bounds}")
            object.__setattr__(self, "bounds", (float(lo), float(hi)))


@dataclass(frozen=True)
class Categorical:
    """Unordered token column with a fixed category set."""

    categories: tuple[str, ...]

    def __post_init__(self):
        cats = tuple(str(c) for c in self.categories)
        if not cats:
            raise SchemaError("categorical column needs at least one category")
        if len(set(cats)) != len(cats):
            raise SchemaError(f"duplicate categories: {cats}")
        object.__setattr__(self, "categories", cats)


@dataclass(frozen=True)
class Ordinal:
    """Ordered token column; each level carries an integer label.

    Labels default to ``int(level)`` when every level token parses as an
    integer, otherwise to the level position. Aggregations operate on the
    labels.
    """

    levels: tuple[str, ...]
    labels: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        levels = tuple(str(v) for v in self.levels)
        if not levels:
            raise SchemaError("ordinal column needs at least one level")
        if len(set(levels)) != len(levels):
            raise SchemaError(f"duplicate ordinal levels: {levels}")
        labels = self.labels
        if labels is None:
            try:
                labels = tuple(int(v) for v in levels)
            except ValueError:
                labels = tuple(range(len(levels)))
        labels = tuple(int(x) for x in labels)
        if len(labels) != len(levels):
            raise SchemaError("one label per level required")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "labels", labels)

    @property
    def categories(self) -> tuple[str, ...]:
        return self.levels

    def label_of(self, token: str) -> int:
        return self.labels[self.levels.index(token)]


@dataclass(frozen=True)
class Mixed:
    """Numeric column where a few exact values behave like categories."""

    special_values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.special_values)
        if any(not math.isfinite(v) for v in vals):
            raise SchemaError("special values must be finite")
        if len(set(vals)) != len(vals):
            raise SchemaError(f"duplicate special values: {vals}")
        object.__setattr__(self, "special_values", vals)


ColumnKind = Union[Continuous, Categorical, Ordinal, Mixed]


def is_numeric_kind(kind: ColumnKind) -> bool:
    """Whether cells of this kind are floats (and can be aggregated)."""
    return isinstance(kind, (Continuous, Mixed))


def is_discrete_kind(kind: ColumnKind) -> bool:
    """Whether cells of this kind are tokens (and can key a group-by)."""
    return isinstance(kind, (Categorical, Ordinal))


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: ColumnKind
    nullable: bool = False
    target: bool = False


@dataclass(frozen=True)
class TableSchema:
    columns: tuple[ColumnSchema, ...]

    def __post_init__(self):
        cols = tuple(self.columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names: {names}")
        object.__setattr__(self, "columns", cols)

    def __iter__(self):
        return iter(self.columns)

    def __len__(self):
        return len(self.columns)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> ColumnSchema:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"unknown column {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def numeric_columns(self) -> tuple[ColumnSchema, ...]:
        return tuple(c for c in self.columns if is_numeric_kind(c.kind))

    def discrete_columns(self) -> tuple[ColumnSchema, ...]:
        return tuple(c for c in self.columns if is_discrete_kind(c.kind))

    def target_column(self) -> Optional[ColumnSchema]:
        for c in self.columns:
            if c.target:
                return c
        return None


class Table:
    """Immutable columnar table with explicit nulls.

    Columns are stored as tuples of cells; numeric access converts to a
    float array with NaN standing in for null.
    """

    def __init__(self, schema: TableSchema, columns: Mapping[str, Sequence[Cell]]):
        self.schema = schema
        data: dict[str, tuple[Cell, ...]] = {}
        n_rows = None
        for col in schema:
            if col.name not in columns:
                raise SchemaError(f"missing data for column {col.name!r}")
            cells = tuple(_coerce_cell(v, col.kind) for v in columns[col.name])
            if n_rows is None:
                n_rows = len(cells)
            elif len(cells) != n_rows:
                raise SchemaError(
                    f"column {col.name!r} has {len(cells)} rows, expected {n_rows}"
                )
            data[col.name] = cells
        extra = set(columns) - set(schema.names)
        if extra:
            raise SchemaError(f"data for undeclared columns: {sorted(extra)}")
        self._data = data
        self.n_rows = n_rows if n_rows is not None else 0

    def column(self, name: str) -> tuple[Cell, ...]:
        return self._data[name]

    def numeric(self, name: str) -> np.ndarray:
        """Column as float64 with NaN for nulls; ordinals map to labels."""
        col = self.schema.column(name)
        cells = self._data[name]
        if is_numeric_kind(col.kind):
            return np.array(
                [np.nan if v is None else v for v in cells], dtype=np.float64
            )
        if isinstance(col.kind, Ordinal):
            lut = dict(zip(col.kind.levels, col.kind.labels))
            return np.array(
                [np.nan if v is None else float(lut[v]) for v in cells],
                dtype=np.float64,
            )
        raise TypeError(f"column {name!r} is not numeric-capable")

    def tokens(self, name: str) -> np.ndarray:
        """Column as an object array of tokens (None preserved)."""
        return np.array(self._data[name], dtype=object)

    def take(self, indices: Iterable[int]) -> "Table":
        idx = list(indices)
        cols = {n: [cells[i] for i in idx] for n, cells in self._data.items()}
        return Table(self.schema, cols)

    def rows(self):
        names = self.schema.names
        cols = [self._data[n] for n in names]
        for i in range(self.n_rows):
            yield tuple(c[i] for c in cols)

    def equals(self, other: "Table", rel_tol: float = 0.0) -> bool:
        """Value equality; floats compared within ``rel_tol`` relative."""
        if self.schema.names != other.schema.names or self.n_rows != other.n_rows:
            return False
        for name in self.schema.names:
            for a, b in zip(self._data[name], other.column(name)):
                if a is None or b is None:
                    if a is not b:
                        return False
                elif isinstance(a, float) and isinstance(b, float):
                    if a != b and abs(a - b) > rel_tol * max(abs(a), abs(b)):
                        return False
                elif a != b:
                    return False
        return True

    def __repr__(self):
        return f"Table({self.n_rows} rows x {len(self.schema)} columns)"


def _coerce_cell(value: Cell, kind: ColumnKind) -> Cell:
    if value is None:
        return None
    if is_numeric_kind(kind):
        return float(value)
    return str(value)


@dataclass(frozen=True)
class Violation:
    column: str
    row: Optional[int]
    reason: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_table(table: Table, schema: Optional[TableSchema] = None) -> ValidationReport:
    """Check every cell of ``table`` against ``schema`` (default: its own).

    Violations are data, not failures: the report lists each offending
    (column, row, reason) triple and is empty iff the table conforms.
    """
    schema = schema if schema is not None else table.schema
    report = ValidationReport()
    for col in schema:
        cells = table.column(col.name)
        for i, v in enumerate(cells):
            if v is None:
                if not col.nullable:
                    report.violations.append(Violation(col.name, i, "null"))
                continue
            if isinstance(col.kind, (Continuous, Mixed)):
                if not isinstance(v, float) or not math.isfinite(v):
                    report.violations.append(
                        Violation(col.name, i, f"non-finite value {v!r}")
                    )
                elif isinstance(col.kind, Continuous) and col.kind.bounds is not None:
                    lo, hi = col.kind.bounds
                    if not (lo <= v <= hi):
                        report.violations.append(
                            Violation(col.name, i, f"value {v} outside [{lo}, {hi}]")
                        )
            elif isinstance(col.kind, Categorical):
                if v not in col.kind.categories:
                    report.violations.append(
                        Violation(col.name, i, f"category {v!r} not in declared set")
                    )
            elif isinstance(col.kind, Ordinal):
                if v not in col.kind.levels:
                    report.violations.append(
                        Violation(col.name, i, f"level {v!r} not in declared set")
                    )
    return report
