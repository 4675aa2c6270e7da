"""Synopsis fidelity metrics and the aggregated quality report.

Every metric returns a score in [0, 1], 1 meaning the generated data is
indistinguishable from the real data under that lens. Nulls are excluded
from all computations except the missing-value similarity, which is the
one metric that scores them.

Report structure: per-column scores, per-pair scores (contingency for
discrete pairs, correlation for numeric pairs), and per-metric unweighted
means, grouped under four headings: coverage, constraint, similarity and
relationship.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import io as io_mod
from .model import Table, is_discrete_kind, is_numeric_kind

METRIC_FAMILIES = {
    "category_coverage": "coverage",
    "range_coverage": "coverage",
    "boundary_adherence": "constraint",
    "ks_complement": "similarity",
    "tvd_complement": "similarity",
    "missing_value_similarity": "similarity",
    "mean_similarity": "similarity",
    "median_similarity": "similarity",
    "std_similarity": "similarity",
    "contingency_similarity": "relationship",
    "pearson_similarity": "relationship",
    "spearman_similarity": "relationship",
    "cardinality_similarity": "relationship",
}


class MetricError(ValueError):
    """Raised when a metric's preconditions do not hold."""


def _tokens(col) -> list:
    return [v for v in col]


def _non_null_tokens(col) -> list[str]:
    return [v for v in col if v is not None]


def _non_null_floats(col) -> np.ndarray:
    arr = np.asarray([v for v in col if v is not None], dtype=np.float64)
    return arr[np.isfinite(arr)]


# ---------------------------------------------------------------------------
# per-column metrics


def category_coverage(real_col, gen_col) -> float:
    """Share of real categories present in the generated column, capped at
    one; categories invented by the generator do not raise the score."""
    real = set(_non_null_tokens(real_col))
    if not real:
        raise MetricError("real column has no categories")
    gen = set(_non_null_tokens(gen_col))
    return len(gen & real) / len(real)


def category_coverage_detail(real_col, gen_col) -> dict:
    real = set(_non_null_tokens(real_col))
    gen = set(_non_null_tokens(gen_col))
    return {
        "novel_categories": sorted(gen - real),
        "raw_ratio": (len(gen) / len(real)) if real else None,
    }


def range_coverage(real_col, gen_col) -> float:
    """How much of the real [min, max] span the generated values reach,
    floored at zero when the deficits exceed the whole range."""
    real = _non_null_floats(real_col)
    gen = _non_null_floats(gen_col)
    if real.size == 0 or gen.size == 0:
        raise MetricError("empty column")
    rmin, rmax = float(real.min()), float(real.max())
    if rmax == rmin:
        raise MetricError("degenerate real range")
    span = rmax - rmin
    low_deficit = max((float(gen.min()) - rmin) / span, 0.0)
    high_deficit = max((rmax - float(gen.max())) / span, 0.0)
    return max(1.0 - (low_deficit + high_deficit), 0.0)


def boundary_adherence(real_col, gen_col) -> float:
    """Fraction of generated values inside the closed real [min, max]."""
    real = _non_null_floats(real_col)
    gen = _non_null_floats(gen_col)
    if real.size == 0 or gen.size == 0:
        raise MetricError("empty column")
    rmin, rmax = float(real.min()), float(real.max())
    return float(((gen >= rmin) & (gen <= rmax)).mean())


def ks_complement(real_col, gen_col) -> float:
    """One minus the two-sample Kolmogorov-Smirnov statistic."""
    real = np.sort(_non_null_floats(real_col))
    gen = np.sort(_non_null_floats(gen_col))
    if real.size == 0 or gen.size == 0:
        raise MetricError("empty column")
    # sweep the pooled points; ECDF is right-continuous
    pooled = np.concatenate([real, gen])
    pooled.sort(kind="mergesort")
    f_real = np.searchsorted(real, pooled, side="right") / real.size
    f_gen = np.searchsorted(gen, pooled, side="right") / gen.size
    return 1.0 - float(np.abs(f_real - f_gen).max())


def tvd_complement(real_col, gen_col) -> float:
    """One minus the total variation distance between category frequencies."""
    real = _non_null_tokens(real_col)
    gen = _non_null_tokens(gen_col)
    if not real or not gen:
        raise MetricError("empty column")
    support = set(real) | set(gen)
    dist = 0.0
    for cat in support:
        p = real.count(cat) / len(real)
        q = gen.count(cat) / len(gen)
        dist += abs(p - q)
    return 1.0 - 0.5 * dist


def missing_value_similarity(real_col, gen_col) -> float:
    """One minus the difference between null proportions."""
    real = _tokens(real_col)
    gen = _tokens(gen_col)
    if not real or not gen:
        raise MetricError("empty column")
    p = sum(1 for v in real if v is None) / len(real)
    q = sum(1 for v in gen if v is None) / len(gen)
    return 1.0 - abs(p - q)


def statistic_similarity(real_col, gen_col, stat: str = "mean") -> float:
    """Similarity of mean, median or std, normalized by the real range."""
    real = _non_null_floats(real_col)
    gen = _non_null_floats(gen_col)
    if real.size == 0 or gen.size == 0:
        raise MetricError("empty column")
    span = float(real.max() - real.min())
    if span == 0:
        raise MetricError("degenerate real range")
    fns = {"mean": np.mean, "median": np.median, "std": np.std}
    if stat not in fns:
        raise MetricError(f"unknown statistic {stat!r}")
    f = fns[stat]
    return max(1.0 - abs(float(f(real)) - float(f(gen))) / span, 0.0)


# ---------------------------------------------------------------------------
# per-pair metrics


def contingency_similarity(real_pair, gen_pair) -> float:
    """One minus the total variation distance between the two normalized
    joint frequency tables."""
    real = [(a, b) for a, b in zip(*real_pair) if a is not None and b is not None]
    gen = [(a, b) for a, b in zip(*gen_pair) if a is not None and b is not None]
    if not real or not gen:
        raise MetricError("empty pair")
    support = set(real) | set(gen)
    dist = 0.0
    for cell in support:
        p = real.count(cell) / len(real)
        q = gen.count(cell) / len(gen)
        dist += abs(p - q)
    return 1.0 - 0.5 * dist


def _pairwise_floats(pair) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for a, b in zip(*pair):
        if a is not None and b is not None:
            xs.append(float(a))
            ys.append(float(b))
    return np.array(xs), np.array(ys)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2 or float(np.std(x)) == 0.0 or float(np.std(y)) == 0.0:
        raise MetricError("zero-variance column in correlation")
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc * yc).sum() / np.sqrt((xc * xc).sum() * (yc * yc).sum()))


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def correlation_similarity(real_pair, gen_pair, method: str = "pearson") -> float:
    """One minus half the gap between the real and generated correlation
    coefficients (Pearson, or Spearman via midranks)."""
    rx, ry = _pairwise_floats(real_pair)
    gx, gy = _pairwise_floats(gen_pair)
    if method == "spearman":
        rx, ry = _midranks(rx), _midranks(ry)
        gx, gy = _midranks(gx), _midranks(gy)
    elif method != "pearson":
        raise MetricError(f"unknown method {method!r}")
    return 1.0 - abs(_pearson(rx, ry) - _pearson(gx, gy)) / 2.0


def cardinality_similarity(real_counts: Sequence[float],
                           gen_counts: Sequence[float]) -> float:
    """KS complement between two per-parent child-count distributions."""
    if len(real_counts) == 0 or len(gen_counts) == 0:
        raise MetricError("empty count sequence")
    return ks_complement(list(real_counts), list(gen_counts))


# ---------------------------------------------------------------------------
# report


@dataclass
class MetricScore:
    name: str
    columns: tuple[str, ...]
    value: float
    detail: dict = field(default_factory=dict)


@dataclass
class QualityReport:
    envelope_kind = "quality_report"

    scores: list[MetricScore]
    aggregates: dict[str, float]
    families: dict[str, float]
    metadata: dict

    def score(self, name: str, *columns: str) -> float:
        for s in self.scores:
            if s.name == name and s.columns == columns:
                return s.value
        raise KeyError(f"no score {name} for {columns}")

    def to_payload(self) -> dict:
        return {
            "scores": [
                {
                    "metric": s.name,
                    "columns": list(s.columns),
                    "value": s.value,
                    "detail": s.detail,
                }
                for s in self.scores
            ],
            "aggregates": self.aggregates,
            "families": self.families,
            "metadata": self.metadata,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "QualityReport":
        scores = [
            MetricScore(
                d["metric"], tuple(d["columns"]), float(d["value"]),
                d.get("detail", {}),
            )
            for d in payload["scores"]
        ]
        return cls(
            scores,
            {k: float(v) for k, v in payload["aggregates"].items()},
            {k: float(v) for k, v in payload["families"].items()},
            payload.get("metadata", {}),
        )

    def to_csv(self) -> str:
        lines = ["metric,columns,score"]
        for s in self.scores:
            lines.append(f"{s.name},{'|'.join(s.columns)},{s.value!r}")
        for name in sorted(self.aggregates):
            lines.append(f"{name},__mean__,{self.aggregates[name]!r}")
        return "\n".join(lines) + "\n"


io_mod.register_loader("quality_report")(QualityReport.from_payload)


def quality_report(real: Table, gen: Table, pair_budget: int = 50,
                   seed: int = 0) -> QualityReport:
    """Run every applicable metric per column and per column pair.

    All pairs are scored when their number stays within ``pair_budget``,
    otherwise a seeded uniform subset of that size is drawn.
    """
    if real.schema.names != gen.schema.names:
        raise MetricError("schema mismatch between real and generated tables")
    scores: list[MetricScore] = []

    for col in real.schema:
        r = real.column(col.name)
        g = gen.column(col.name)
        scores.append(MetricScore(
            "missing_value_similarity", (col.name,),
            missing_value_similarity(r, g),
        ))
        if is_discrete_kind(col.kind):
            scores.append(MetricScore(
                "category_coverage", (col.name,), category_coverage(r, g),
                category_coverage_detail(r, g),
            ))
            scores.append(MetricScore(
                "tvd_complement", (col.name,), tvd_complement(r, g),
            ))
        elif is_numeric_kind(col.kind):
            rvals = _non_null_floats(r)
            if rvals.size and float(rvals.max()) > float(rvals.min()):
                scores.append(MetricScore(
                    "range_coverage", (col.name,), range_coverage(r, g),
                ))
                for stat in ("mean", "median", "std"):
                    scores.append(MetricScore(
                        f"{stat}_similarity", (col.name,),
                        statistic_similarity(r, g, stat),
                    ))
            scores.append(MetricScore(
                "boundary_adherence", (col.name,), boundary_adherence(r, g),
            ))
            scores.append(MetricScore(
                "ks_complement", (col.name,), ks_complement(r, g),
            ))

    discrete = [c.name for c in real.schema.discrete_columns()]
    numeric = [c.name for c in real.schema.numeric_columns()]
    disc_pairs = list(itertools.combinations(discrete, 2))
    num_pairs = list(itertools.combinations(numeric, 2))
    rng = np.random.default_rng(seed)
    if len(disc_pairs) + len(num_pairs) > pair_budget:
        all_pairs = [("d", p) for p in disc_pairs] + [("n", p) for p in num_pairs]
        picked = rng.choice(len(all_pairs), size=pair_budget, replace=False)
        chosen = [all_pairs[i] for i in sorted(picked)]
        disc_pairs = [p for kind, p in chosen if kind == "d"]
        num_pairs = [p for kind, p in chosen if kind == "n"]

    for a, b in disc_pairs:
        scores.append(MetricScore(
            "contingency_similarity", (a, b),
            contingency_similarity(
                (real.column(a), real.column(b)), (gen.column(a), gen.column(b))
            ),
        ))
    for a, b in num_pairs:
        try:
            for method in ("pearson", "spearman"):
                scores.append(MetricScore(
                    f"{method}_similarity", (a, b),
                    correlation_similarity(
                        (real.column(a), real.column(b)),
                        (gen.column(a), gen.column(b)),
                        method,
                    ),
                ))
        except MetricError:
            pass  # zero-variance pair: correlation undefined, skip

    aggregates: dict[str, float] = {}
    for name in sorted({s.name for s in scores}):
        vals = [s.value for s in scores if s.name == name]
        aggregates[name] = float(np.mean(vals))
    families: dict[str, float] = {}
    for family in sorted(set(METRIC_FAMILIES.values())):
        vals = [
            s.value for s in scores if METRIC_FAMILIES.get(s.name) == family
        ]
        if vals:
            families[family] = float(np.mean(vals))
    metadata = {
        "real_rows": real.n_rows,
        "generated_rows": gen.n_rows,
        "pair_budget": pair_budget,
        "seed": seed,
    }
    return QualityReport(scores, aggregates, families, metadata)
