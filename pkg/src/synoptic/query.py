"""Aggregate-SQL subset: parser, exact evaluation on tables, approximate
evaluation on synopses, and exact-vs-approximate error reports.

Grammar::

    SELECT agg [, agg]* FROM ident [WHERE cmp [AND cmp]*] [GROUP BY ident list]
    agg := (sum|avg|count|min|max) '(' column-or-* ')'
    cmp := column (=|!=|<>|<|<=|>|>=) literal

Keywords are case-insensitive; literals are numbers or single-quoted
strings. Nulls never satisfy a predicate, are excluded from sum/avg/min/
max and count(column), and are counted by count(*).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .model import (
    Categorical,
    Ordinal,
    Table,
    TableSchema,
    is_discrete_kind,
    is_numeric_kind,
)
from .synopses import (
    GeneratedSynopsis,
    HistogramSynopsis,
    NumericHistogram,
    SampleSynopsis,
    SketchSynopsis,
    WaveletSynopsis,
    cms_query,
    wavelet_reconstruct,
)

AGG_FUNCTIONS = ("sum", "avg", "count", "min", "max")
COMPARE_OPS = ("=", "!=", "<>", "<", "<=", ">", ">=")

FLAG_ESTIMATED = "estimated"
FLAG_UNRELIABLE = "unreliable"


class QueryParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class QueryBindError(ValueError):
    """Query references columns the schema cannot satisfy."""


class UnsupportedQueryError(ValueError):
    """(synopsis kind, aggregate) pair the engine cannot answer."""

    def __init__(self, synopsis_kind: str, what: str):
        super().__init__(f"{synopsis_kind} synopsis cannot answer {what}")
        self.synopsis_kind = synopsis_kind
        self.what = what


@dataclass(frozen=True)
class Aggregate:
    fn: str
    column: Optional[str]  # None means *

    def label(self) -> str:
        return f"{self.fn}({self.column if self.column else '*'})"


@dataclass(frozen=True)
class Predicate:
    column: str
    op: str
    value: Union[float, str]


@dataclass(frozen=True)
class QueryAst:
    aggregates: tuple[Aggregate, ...]
    source: str
    predicates: tuple[Predicate, ...] = ()
    group_by: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# parsing


@dataclass
class _Token:
    kind: str  # ident | number | string | symbol | end
    value: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "'":
            j = i + 1
            buf = []
            while j < n:
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            else:
                raise QueryParseError("unterminated string literal", i)
            tokens.append(_Token("string", "".join(buf), i))
            i = j + 1
            continue
        if c.isdigit() or (c in "+-." and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == ".")):
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] in ".eE" or
                             (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            tokens.append(_Token("number", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
            continue
        for sym in ("<=", ">=", "!=", "<>", "=", "<", ">", "(", ")", ",", "*"):
            if text.startswith(sym, i):
                tokens.append(_Token("symbol", sym, i))
                i += len(sym)
                break
        else:
            raise QueryParseError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_keyword(self, word: str) -> None:
        tok = self.next()
        if tok.kind != "ident" or tok.value.lower() != word:
            raise QueryParseError(f"expected {word.upper()}", tok.pos)

    def expect_symbol(self, sym: str) -> None:
        tok = self.next()
        if tok.kind != "symbol" or tok.value != sym:
            raise QueryParseError(f"expected {sym!r}", tok.pos)

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.value.lower() == word

    def parse(self) -> QueryAst:
        self.expect_keyword("select")
        aggregates = [self.parse_aggregate()]
        while self.peek().kind == "symbol" and self.peek().value == ",":
            self.next()
            aggregates.append(self.parse_aggregate())
        self.expect_keyword("from")
        src = self.next()
        if src.kind != "ident":
            raise QueryParseError("expected table name", src.pos)
        predicates = []
        if self.at_keyword("where"):
            self.next()
            predicates.append(self.parse_predicate())
            while self.at_keyword("and"):
                self.next()
                predicates.append(self.parse_predicate())
        group_by = []
        if self.at_keyword("group"):
            self.next()
            self.expect_keyword("by")
            tok = self.next()
            if tok.kind != "ident":
                raise QueryParseError("expected column name", tok.pos)
            group_by.append(tok.value)
            while self.peek().kind == "symbol" and self.peek().value == ",":
                self.next()
                tok = self.next()
                if tok.kind != "ident":
                    raise QueryParseError("expected column name", tok.pos)
                group_by.append(tok.value)
        tail = self.next()
        if tail.kind != "end":
            raise QueryParseError(f"unexpected trailing input {tail.value!r}", tail.pos)
        return QueryAst(tuple(aggregates), src.value, tuple(predicates), tuple(group_by))

    def parse_aggregate(self) -> Aggregate:
        tok = self.next()
        if tok.kind != "ident":
            raise QueryParseError("expected aggregate function", tok.pos)
        fn = tok.value.lower()
        if fn not in AGG_FUNCTIONS:
            raise QueryParseError(f"unsupported aggregate {tok.value!r}", tok.pos)
        self.expect_symbol("(")
        inner = self.next()
        if inner.kind == "symbol" and inner.value == "*":
            column = None
        elif inner.kind == "ident":
            column = inner.value
        else:
            raise QueryParseError("expected column name or *", inner.pos)
        self.expect_symbol(")")
        if column is None and fn != "count":
            raise QueryParseError(f"{fn}(*) is not supported", tok.pos)
        return Aggregate(fn, column)

    def parse_predicate(self) -> Predicate:
        col = self.next()
        if col.kind != "ident":
            raise QueryParseError("expected column name", col.pos)
        op = self.next()
        if op.kind != "symbol" or op.value not in COMPARE_OPS:
            raise QueryParseError("expected comparison operator", op.pos)
        lit = self.next()
        if lit.kind == "number":
            value: Union[float, str] = float(lit.value)
        elif lit.kind == "string":
            value = lit.value
        else:
            raise QueryParseError("expected literal", lit.pos)
        op_norm = "!=" if op.value == "<>" else op.value
        return Predicate(col.value, op_norm, value)


def parse_query(text: str) -> QueryAst:
    """Parse the aggregate-SQL subset; raises QueryParseError with a byte
    offset on malformed input."""
    return _Parser(text).parse()


def bind(ast: QueryAst, schema: TableSchema) -> None:
    """Check the query against a schema; raises QueryBindError."""
    for agg in ast.aggregates:
        if agg.column is None:
            continue
        if not schema.has_column(agg.column):
            raise QueryBindError(f"unknown column {agg.column!r}")
        kind = schema.column(agg.column).kind
        if agg.fn != "count" and not (is_numeric_kind(kind) or isinstance(kind, Ordinal)):
            raise QueryBindError(
                f"column {agg.column!r} cannot be aggregated with {agg.fn}"
            )
    for pred in ast.predicates:
        if not schema.has_column(pred.column):
            raise QueryBindError(f"unknown column {pred.column!r}")
        kind = schema.column(pred.column).kind
        if isinstance(kind, Categorical):
            if pred.op not in ("=", "!="):
                raise QueryBindError(
                    f"categorical column {pred.column!r} only supports = and !="
                )
            if not isinstance(pred.value, str):
                raise QueryBindError(
                    f"categorical column {pred.column!r} needs a string literal"
                )
        elif is_numeric_kind(kind):
            if not isinstance(pred.value, float):
                raise QueryBindError(
                    f"numeric column {pred.column!r} needs a numeric literal"
                )
        elif isinstance(kind, Ordinal):
            if isinstance(pred.value, str):
                if pred.op not in ("=", "!="):
                    raise QueryBindError(
                        f"ordinal column {pred.column!r} supports ordering "
                        "comparisons on numeric labels only"
                    )
    for name in ast.group_by:
        if not schema.has_column(name):
            raise QueryBindError(f"unknown column {name!r}")
        if not is_discrete_kind(schema.column(name).kind):
            raise QueryBindError(f"column {name!r} cannot be grouped by")


# ---------------------------------------------------------------------------
# results


@dataclass
class QueryResult:
    group_cols: tuple[str, ...]
    aggregates: tuple[Aggregate, ...]
    rows: dict[tuple, tuple]

    def single(self) -> tuple:
        """Values of the only row of an ungrouped result."""
        return self.rows[()]


@dataclass
class ApproxResult(QueryResult):
    flags: dict[tuple, tuple] = field(default_factory=dict)
    source: str = ""


# ---------------------------------------------------------------------------
# exact execution


def _predicate_mask(table: Table, pred: Predicate) -> np.ndarray:
    kind = table.schema.column(pred.column).kind
    if isinstance(kind, Categorical) or (
        isinstance(kind, Ordinal) and isinstance(pred.value, str)
    ):
        cells = table.tokens(pred.column)
        notnull = np.array([v is not None for v in cells])
        if pred.op == "=":
            return notnull & (cells == pred.value)
        return notnull & (cells != pred.value)
    values = table.numeric(pred.column)
    notnull = ~np.isnan(values)
    lit = float(pred.value)
    ops = {
        "=": values == lit,
        "!=": values != lit,
        "<": values < lit,
        "<=": values <= lit,
        ">": values > lit,
        ">=": values >= lit,
    }
    return notnull & ops[pred.op]


def execute_exact(table: Table, ast: QueryAst) -> QueryResult:
    """Ground-truth aggregates; the oracle the synopses are judged against."""
    bind(ast, table.schema)
    mask = np.ones(table.n_rows, dtype=bool)
    for pred in ast.predicates:
        mask &= _predicate_mask(table, pred)
    idx = np.nonzero(mask)[0]

    if ast.group_by:
        key_cols = [table.column(name) for name in ast.group_by]
        groups: dict[tuple, list[int]] = {}
        for i in idx:
            key = tuple(col[i] for col in key_cols)
            groups.setdefault(key, []).append(i)
    else:
        groups = {(): idx.tolist()}

    numeric_cache: dict[str, np.ndarray] = {}

    def numeric(name):
        if name not in numeric_cache:
            numeric_cache[name] = table.numeric(name)
        return numeric_cache[name]

    rows = {}
    for key, members in groups.items():
        values = []
        for agg in ast.aggregates:
            if agg.fn == "count" and agg.column is None:
                values.append(float(len(members)))
                continue
            if agg.fn == "count":
                cells = table.column(agg.column)
                values.append(float(sum(1 for i in members if cells[i] is not None)))
                continue
            arr = numeric(agg.column)[members]
            arr = arr[~np.isnan(arr)]
            if arr.size == 0:
                values.append(None)
            elif agg.fn == "sum":
                values.append(float(arr.sum()))
            elif agg.fn == "avg":
                values.append(float(arr.mean()))
            elif agg.fn == "min":
                values.append(float(arr.min()))
            else:
                values.append(float(arr.max()))
        rows[key] = tuple(values)
    return QueryResult(tuple(ast.group_by), tuple(ast.aggregates), rows)


# ---------------------------------------------------------------------------
# approximate execution


def execute_approx(synopsis, ast: QueryAst) -> ApproxResult:
    """Evaluate on a synopsis; min/max from samples or histograms carry the
    ``unreliable`` flag, everything else is ``estimated``."""
    if isinstance(synopsis, SampleSynopsis):
        return _approx_from_rows(synopsis.table, ast, synopsis.scale, "sample",
                                 minmax_unreliable=True)
    if isinstance(synopsis, GeneratedSynopsis):
        return _approx_from_rows(synopsis.table, ast, synopsis.scale, "generated",
                                 minmax_unreliable=False)
    if isinstance(synopsis, HistogramSynopsis):
        return _approx_from_histogram(synopsis, ast)
    if isinstance(synopsis, WaveletSynopsis):
        return _approx_from_wavelet(synopsis, ast)
    if isinstance(synopsis, SketchSynopsis):
        return _approx_from_sketch(synopsis, ast)
    raise TypeError(f"not a synopsis: {type(synopsis).__name__}")


def _approx_from_rows(table: Table, ast: QueryAst, scale: float, source: str,
                      minmax_unreliable: bool) -> ApproxResult:
    inner = execute_exact(table, ast)
    rows = {}
    flags = {}
    for key, values in inner.rows.items():
        out = []
        fl = []
        for agg, v in zip(ast.aggregates, values):
            if v is not None and agg.fn in ("count", "sum"):
                v = v * scale
            out.append(v)
            if agg.fn in ("min", "max") and minmax_unreliable:
                fl.append(FLAG_UNRELIABLE)
            else:
                fl.append(FLAG_ESTIMATED)
        rows[key] = tuple(out)
        flags[key] = tuple(fl)
    return ApproxResult(inner.group_cols, inner.aggregates, rows, flags, source)


# -- histogram ---------------------------------------------------------------


def _interval_from_predicates(preds: list[Predicate]) -> tuple[float, float]:
    """Conjunction of numeric comparisons as one closed-ish interval;
    equality pins both ends, inequality (!=) removes measure zero and is
    ignored."""
    lo, hi = -math.inf, math.inf
    for p in preds:
        v = float(p.value)
        if p.op in ("<", "<="):
            hi = min(hi, v)
        elif p.op in (">", ">="):
            lo = max(lo, v)
        elif p.op == "=":
            lo, hi = max(lo, v), min(hi, v)
    return lo, hi


def _bucket_overlap(hist: NumericHistogram, lo: float, hi: float):
    """Per-bucket overlap fraction and prorated count/sum estimates under
    the uniform-within-bucket assumption. Full buckets use the stored sums."""
    count = 0.0
    total = 0.0
    for b in range(hist.n_buckets):
        b_lo, b_hi = hist.edges(b)
        if hist.counts[b] == 0:
            continue
        if b_hi == b_lo:  # degenerate single bucket
            if lo <= b_lo <= hi:
                count += float(hist.counts[b])
                total += float(hist.sums[b])
            continue
        a = max(lo, b_lo)
        z = min(hi, b_hi)
        if z <= a:
            continue
        frac = (z - a) / (b_hi - b_lo)
        if frac >= 1.0 - 1e-12:
            count += float(hist.counts[b])
            total += float(hist.sums[b])
        else:
            c = float(hist.counts[b]) * frac
            count += c
            total += c * (a + z) / 2.0
    return count, total


def _histogram_selectivity(syn: HistogramSynopsis, pred: Predicate) -> float:
    """Fraction of all rows satisfying one predicate (independence model)."""
    kind = syn.schema.column(pred.column).kind
    if isinstance(kind, Categorical) or (
        isinstance(kind, Ordinal) and isinstance(pred.value, str)
    ):
        cc = syn.categorical[pred.column]
        hit = cc.counts.get(pred.value, 0)
        nonnull = sum(cc.counts.values())
        count = hit if pred.op == "=" else nonnull - hit
        return count / syn.row_count if syn.row_count else 0.0
    if isinstance(kind, Ordinal):
        cc = syn.categorical[pred.column]
        lit = float(pred.value)
        count = 0
        for token, c in cc.counts.items():
            label = float(kind.label_of(token))
            if _compare(label, pred.op, lit):
                count += c
        return count / syn.row_count if syn.row_count else 0.0
    hist = syn.numeric[pred.column]
    lo, hi = _interval_from_predicates([pred])
    count, _ = _bucket_overlap(hist, lo, hi)
    return count / syn.row_count if syn.row_count else 0.0


def _compare(a: float, op: str, b: float) -> bool:
    return {
        "=": a == b, "!=": a != b, "<": a < b, "<=": a <= b,
        ">": a > b, ">=": a >= b,
    }[op]


def _approx_from_histogram(syn: HistogramSynopsis, ast: QueryAst) -> ApproxResult:
    bind(ast, syn.schema)
    if ast.group_by:
        return _histogram_group_by(syn, ast)

    rows = []
    flags = []
    for agg in ast.aggregates:
        if agg.fn == "count" and agg.column is None:
            sel = 1.0
            for p in ast.predicates:
                sel *= _histogram_selectivity(syn, p)
            rows.append(syn.row_count * sel)
            flags.append(FLAG_ESTIMATED)
            continue
        col_kind = syn.schema.column(agg.column).kind
        if isinstance(col_kind, Ordinal):
            value, flag = _histogram_ordinal_aggregate(syn, ast, agg)
            rows.append(value)
            flags.append(flag)
            continue
        if not is_numeric_kind(col_kind):
            if agg.fn == "count":
                cc = syn.categorical[agg.column]
                sel = 1.0
                for p in ast.predicates:
                    sel *= _histogram_selectivity(syn, p)
                rows.append(sum(cc.counts.values()) * sel)
                flags.append(FLAG_ESTIMATED)
                continue
            raise UnsupportedQueryError("histogram", agg.label())
        hist = syn.numeric[agg.column]
        own = [p for p in ast.predicates if p.column == agg.column]
        others = [p for p in ast.predicates if p.column != agg.column]
        lo, hi = _interval_from_predicates(own)
        count, total = _bucket_overlap(hist, lo, hi)
        sel = 1.0
        for p in others:
            sel *= _histogram_selectivity(syn, p)
        if agg.fn == "count":
            rows.append(count * sel)
            flags.append(FLAG_ESTIMATED)
        elif agg.fn == "sum":
            rows.append(total * sel)
            flags.append(FLAG_ESTIMATED)
        elif agg.fn == "avg":
            rows.append(total / count if count > 0 else None)
            flags.append(FLAG_ESTIMATED)
        else:
            rows.append(_histogram_extreme(hist, lo, hi, agg.fn))
            flags.append(FLAG_UNRELIABLE)
    return ApproxResult((), tuple(ast.aggregates), {(): tuple(rows)},
                        {(): tuple(flags)}, "histogram")


def _histogram_extreme(hist: NumericHistogram, lo: float, hi: float,
                       fn: str) -> Optional[float]:
    """Bucket-edge estimate of min or max within the constraint interval."""
    hit = []
    for b in range(hist.n_buckets):
        if hist.counts[b] == 0:
            continue
        b_lo, b_hi = hist.edges(b)
        if b_hi == b_lo:
            if lo <= b_lo <= hi:
                hit.append((b_lo, b_hi))
            continue
        if min(hi, b_hi) > max(lo, b_lo):
            hit.append((b_lo, b_hi))
    if not hit:
        return None
    if fn == "min":
        return max(hit[0][0], lo) if math.isfinite(lo) else hit[0][0]
    return min(hit[-1][1], hi) if math.isfinite(hi) else hit[-1][1]


def _histogram_ordinal_aggregate(syn: HistogramSynopsis, ast: QueryAst,
                                 agg: Aggregate):
    """Ordinal aggregates from category counts; exact for predicates on the
    ordinal column itself."""
    kind = syn.schema.column(agg.column).kind
    cc = syn.categorical[agg.column]
    own = [p for p in ast.predicates if p.column == agg.column]
    others = [p for p in ast.predicates if p.column != agg.column]
    sel = 1.0
    for p in others:
        sel *= _histogram_selectivity(syn, p)
    labels = []
    counts = []
    for token, c in cc.counts.items():
        if c == 0:
            continue
        label = float(kind.label_of(token))
        ok = True
        for p in own:
            if isinstance(p.value, str):
                ok = ok and _compare_token(token, p.op, p.value)
            else:
                ok = ok and _compare(label, p.op, float(p.value))
        if ok:
            labels.append(label)
            counts.append(c)
    n = sum(counts)
    if agg.fn == "count":
        return n * sel, FLAG_ESTIMATED
    if n == 0:
        return None, FLAG_ESTIMATED
    total = sum(l * c for l, c in zip(labels, counts))
    if agg.fn == "sum":
        return total * sel, FLAG_ESTIMATED
    if agg.fn == "avg":
        return total / n, FLAG_ESTIMATED
    if agg.fn == "min":
        return min(labels), FLAG_UNRELIABLE
    return max(labels), FLAG_UNRELIABLE


def _compare_token(token: str, op: str, value: str) -> bool:
    return token == value if op == "=" else token != value


def _histogram_group_by(syn: HistogramSynopsis, ast: QueryAst) -> ApproxResult:
    """Group-by answers come from stored category counts only."""
    if len(ast.group_by) != 1:
        raise UnsupportedQueryError("histogram", "multi-column GROUP BY")
    gcol = ast.group_by[0]
    for agg in ast.aggregates:
        if not (agg.fn == "count" and (agg.column is None or agg.column == gcol)):
            raise UnsupportedQueryError(
                "histogram", f"{agg.label()} under GROUP BY"
            )
    cc = syn.categorical[gcol]
    own = [p for p in ast.predicates if p.column == gcol]
    others = [p for p in ast.predicates if p.column != gcol]
    sel = 1.0
    for p in others:
        sel *= _histogram_selectivity(syn, p)
    kind = syn.schema.column(gcol).kind
    rows = {}
    flags = {}
    for token, count in cc.counts.items():
        if count == 0:
            continue
        ok = True
        for p in own:
            if isinstance(p.value, str):
                ok = ok and _compare_token(token, p.op, p.value)
            elif isinstance(kind, Ordinal):
                ok = ok and _compare(float(kind.label_of(token)), p.op, float(p.value))
        if not ok:
            continue
        est = count * sel
        rows[(token,)] = tuple(est for _ in ast.aggregates)
        flags[(token,)] = tuple(FLAG_ESTIMATED for _ in ast.aggregates)
    return ApproxResult((gcol,), tuple(ast.aggregates), rows, flags, "histogram")


# -- wavelet -----------------------------------------------------------------


def _approx_from_wavelet(syn: WaveletSynopsis, ast: QueryAst) -> ApproxResult:
    bind(ast, syn.schema)
    if ast.group_by:
        raise UnsupportedQueryError("wavelet", "GROUP BY")
    referenced = {a.column for a in ast.aggregates if a.column is not None}
    referenced |= {p.column for p in ast.predicates}
    if len(referenced) > 1:
        raise UnsupportedQueryError("wavelet", "multi-column queries")
    column = next(iter(referenced)) if referenced else None
    if column is not None and column not in syn.columns:
        raise UnsupportedQueryError("wavelet", f"column {column!r} not compressed")

    values = wavelet_reconstruct(syn.columns[column]) if column else None
    mask = np.ones(values.size if values is not None else 0, dtype=bool)
    for p in ast.predicates:
        lit = float(p.value)
        mask &= {
            "=": values == lit, "!=": values != lit, "<": values < lit,
            "<=": values <= lit, ">": values > lit, ">=": values >= lit,
        }[p.op]

    rows = []
    flags = []
    for agg in ast.aggregates:
        if agg.fn == "count" and agg.column is None:
            rows.append(float(mask.sum()) if ast.predicates else float(syn.row_count))
            flags.append(FLAG_ESTIMATED)
            continue
        sub = values[mask]
        if agg.fn == "count":
            rows.append(float(sub.size))
        elif sub.size == 0:
            rows.append(None)
        elif agg.fn == "sum":
            rows.append(float(sub.sum()))
        elif agg.fn == "avg":
            rows.append(float(sub.mean()))
        elif agg.fn == "min":
            rows.append(float(sub.min()))
        else:
            rows.append(float(sub.max()))
        flags.append(FLAG_ESTIMATED)
    return ApproxResult((), tuple(ast.aggregates), {(): tuple(rows)},
                        {(): tuple(flags)}, "wavelet")


# -- sketch ------------------------------------------------------------------


def _approx_from_sketch(syn: SketchSynopsis, ast: QueryAst) -> ApproxResult:
    bind(ast, syn.schema)
    if ast.group_by:
        raise UnsupportedQueryError("sketch", "GROUP BY")
    for agg in ast.aggregates:
        if agg.fn != "count" or (agg.column is not None and agg.column != syn.column):
            raise UnsupportedQueryError("sketch", agg.label())
    if len(ast.predicates) != 1:
        raise UnsupportedQueryError("sketch", "exactly one equality predicate required")
    pred = ast.predicates[0]
    if pred.column != syn.column or pred.op != "=":
        raise UnsupportedQueryError(
            "sketch", f"predicate must be {syn.column} = literal"
        )
    kind = syn.schema.column(syn.column).kind
    item = float(pred.value) if is_numeric_kind(kind) else str(pred.value)
    est = float(cms_query(syn, item))
    values = tuple(est for _ in ast.aggregates)
    flags = tuple(FLAG_ESTIMATED for _ in ast.aggregates)
    return ApproxResult((), tuple(ast.aggregates), {(): values}, {(): flags}, "sketch")


# ---------------------------------------------------------------------------
# error reports


@dataclass
class ErrorReport:
    cell_errors: dict[tuple, tuple]
    mean: float
    median: float
    max: float
    missing_groups: list[tuple]
    spurious_groups: list[tuple]

    def to_dict(self) -> dict:
        return {
            "cells": [
                {"group": list(k), "errors": list(v)}
                for k, v in sorted(self.cell_errors.items(), key=lambda kv: str(kv[0]))
            ],
            "mean": self.mean,
            "median": self.median,
            "max": self.max,
            "missing_groups": [list(g) for g in self.missing_groups],
            "spurious_groups": [list(g) for g in self.spurious_groups],
        }


def compare_results(exact: QueryResult, approx: QueryResult,
                    eps: float = 1e-12) -> ErrorReport:
    """Per-cell relative errors |approx - exact| / max(|exact|, eps);
    groups present on only one side are listed, not scored."""
    cell_errors = {}
    collected = []
    for key, evals in exact.rows.items():
        if key not in approx.rows:
            continue
        avals = approx.rows[key]
        errs = []
        for e, a in zip(evals, avals):
            if e is None or a is None:
                errs.append(None)
                continue
            err = abs(a - e) / max(abs(e), eps)
            errs.append(err)
            collected.append(err)
        cell_errors[key] = tuple(errs)
    missing = sorted((k for k in exact.rows if k not in approx.rows), key=str)
    spurious = sorted((k for k in approx.rows if k not in exact.rows), key=str)
    if collected:
        arr = np.array(collected)
        mean, median, worst = float(arr.mean()), float(np.median(arr)), float(arr.max())
    else:
        mean = median = worst = 0.0
    return ErrorReport(cell_errors, mean, median, worst, missing, spurious)


# ---------------------------------------------------------------------------
# result emitters


def result_to_csv(result: QueryResult) -> str:
    header = list(result.group_cols) + [a.label() for a in result.aggregates]
    lines = [",".join(header)]
    for key in sorted(result.rows, key=str):
        cells = ["" if v is None else str(v) for v in key]
        cells += ["" if v is None else repr(float(v)) for v in result.rows[key]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def result_to_dict(result: QueryResult) -> dict:
    doc = {
        "group_columns": list(result.group_cols),
        "aggregates": [a.label() for a in result.aggregates],
        "rows": [
            {
                "group": list(key),
                "values": [None if v is None else float(v) for v in result.rows[key]],
            }
            for key in sorted(result.rows, key=str)
        ],
    }
    if isinstance(result, ApproxResult):
        doc["source"] = result.source
        for row, key in zip(doc["rows"], sorted(result.rows, key=str)):
            row["flags"] = list(result.flags[key])
    return doc
