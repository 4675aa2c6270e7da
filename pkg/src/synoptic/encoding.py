"""Reversible encoding of tables into the numeric training matrix.

Each numeric column becomes a scalar slot plus a one-hot mode block: the
scalar is the value normalized against the mode the fitted mixture assigns
it to, scaled by ``mode_span`` standard deviations and clamped to [-1, 1]
so a tanh output can represent every training value. Mixed columns carry
their special values as extra leading modes with scalar zero. Discrete
columns become one-hot blocks with additive uniform noise renormalized to
sum one. Nullable numeric columns get a trailing two-slot null indicator
block; their null cells are filled with a value drawn uniformly from the
observed non-null pool. Nullable discrete columns get an extra null slot.

Layout: numeric (scalar, mode block) pairs in schema order, then discrete
blocks in schema order, then null indicator blocks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import io as io_mod
from .gmm import GaussianMixture1D
from .model import (
    Categorical,
    Continuous,
    Mixed,
    Ordinal,
    Table,
    TableSchema,
    is_discrete_kind,
    is_numeric_kind,
    validate_table,
)


class EncodingError(ValueError):
    """Raised for cells or matrices the fitted encoder cannot handle."""


@dataclass
class NumericColumnLayout:
    name: str
    value_col: int
    block: slice
    specials: tuple[float, ...]
    bounds: Optional[tuple[float, float]]
    nullable: bool
    indicator: Optional[slice] = None

    @property
    def n_modes(self) -> int:
        return self.block.stop - self.block.start


@dataclass
class DiscreteColumnLayout:
    name: str
    categories: tuple[str, ...]
    block: slice
    has_null_slot: bool

    @property
    def width(self) -> int:
        return self.block.stop - self.block.start


@dataclass
class EncodedMatrix:
    """Row-major training matrix plus the source row count."""

    data: np.ndarray
    source_rows: int

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.data.shape[0]


class TableEncoder(BaseEstimator):
    """Fit per-column transforms and map tables to/from training matrices.

    Parameters
    ----------
    mode_span : float
        How many mode standard deviations map to scalar +-1.
    category_noise : float
        Upper bound of the additive uniform noise on discrete one-hots;
        must stay below 1 so the argmax survives renormalization.
    max_modes : int
        Mixture size cap per numeric column.
    seed : int
        Drives mixture initialization and the transform-time noise/fill
        draws (a transform call may override its own seed).
    """

    def __init__(self, mode_span: float = 4.0, category_noise: float = 0.2,
                 max_modes: int = 10, seed: int = 0):
        self.mode_span = mode_span
        self.category_noise = category_noise
        self.max_modes = max_modes
        self.seed = seed

    # -- fitting ------------------------------------------------------------

    def fit(self, table: Table):
        if self.mode_span <= 0:
            raise ValueError("mode_span must be positive")
        if not (0 <= self.category_noise < 1):
            raise ValueError("category_noise must lie in [0, 1)")
        report = validate_table(table)
        if not report.ok:
            raise EncodingError(f"table fails validation: {report.violations[:3]}")

        self.schema_ = table.schema
        rng = np.random.default_rng(self.seed)
        self.numeric_: list[NumericColumnLayout] = []
        self.discrete_: list[DiscreteColumnLayout] = []
        self._mixtures: dict[str, Optional[GaussianMixture1D]] = {}
        self._fill_pools: dict[str, np.ndarray] = {}

        pos = 0
        for col in table.schema:
            if not is_numeric_kind(col.kind):
                continue
            gmm_seed = int(rng.integers(2**31))
            values = table.numeric(col.name)
            observed = values[~np.isnan(values)]
            specials = tuple(
                sorted(col.kind.special_values)
            ) if isinstance(col.kind, Mixed) else ()
            pool = observed
            if specials:
                keep = ~np.isin(observed, np.array(specials))
                gauss = observed[keep]
            else:
                gauss = observed
            mixture = None
            if gauss.size == 0:
                if not specials:
                    raise EncodingError(f"column {col.name!r} has no usable values")
            else:
                if np.unique(gauss).size < 2:
                    warnings.warn(
                        f"column {col.name!r}: fewer than 2 distinct values, "
                        "degenerate single-mode fit",
                        stacklevel=2,
                    )
                mixture = GaussianMixture1D(
                    max_modes=self.max_modes, seed=gmm_seed
                ).fit(gauss)
            self._mixtures[col.name] = mixture
            self._fill_pools[col.name] = pool
            n_modes = len(specials) + (mixture.n_modes_ if mixture else 0)
            bounds = col.kind.bounds if isinstance(col.kind, Continuous) else None
            self.numeric_.append(
                NumericColumnLayout(
                    name=col.name,
                    value_col=pos,
                    block=slice(pos + 1, pos + 1 + n_modes),
                    specials=specials,
                    bounds=bounds,
                    nullable=col.nullable,
                )
            )
            pos += 1 + n_modes
        for col in table.schema:
            if not is_discrete_kind(col.kind):
                continue
            cats = col.kind.categories
            width = len(cats) + (1 if col.nullable else 0)
            self.discrete_.append(
                DiscreteColumnLayout(
                    name=col.name,
                    categories=cats,
                    block=slice(pos, pos + width),
                    has_null_slot=col.nullable,
                )
            )
            pos += width
        for lay in self.numeric_:
            if lay.nullable:
                lay.indicator = slice(pos, pos + 2)
                pos += 2
        self.width_ = pos
        return self

    # -- encoding -----------------------------------------------------------

    def transform(self, table: Table, seed: Optional[int] = None) -> EncodedMatrix:
        self._check_fitted()
        if table.schema.names != self.schema_.names:
            raise EncodingError("table columns do not match the fitted schema")
        rng = np.random.default_rng(self.seed if seed is None else seed)
        n = table.n_rows
        out = np.zeros((n, self.width_), dtype=np.float64)

        for lay in self.numeric_:
            values = table.numeric(lay.name)
            null_mask = np.isnan(values)
            if null_mask.any():
                if not lay.nullable:
                    raise EncodingError(f"nulls in non-nullable column {lay.name!r}")
                pool = self._fill_pools[lay.name]
                values = values.copy()
                values[null_mask] = rng.choice(pool, size=int(null_mask.sum()))
            mixture = self._mixtures[lay.name]
            n_spec = len(lay.specials)
            special_idx = np.full(n, -1, dtype=int)
            for s_i, s in enumerate(lay.specials):
                special_idx[values == s] = s_i
            gauss_mask = special_idx < 0
            if gauss_mask.any():
                if mixture is None:
                    bad = values[gauss_mask][0]
                    raise EncodingError(
                        f"column {lay.name!r}: value {bad} is not a special value "
                        "and no continuous part was fitted"
                    )
                gvals = values[gauss_mask]
                modes = mixture.assign_modes(gvals)
                scal = (gvals - mixture.means_[modes]) / (
                    self.mode_span * mixture.stds_[modes]
                )
                out[gauss_mask, lay.value_col] = np.clip(scal, -1.0, 1.0)
                rows = np.nonzero(gauss_mask)[0]
                out[rows, lay.block.start + n_spec + modes] = 1.0
            if n_spec:
                rows = np.nonzero(~gauss_mask)[0]
                out[rows, lay.block.start + special_idx[~gauss_mask]] = 1.0
            if lay.indicator is not None:
                out[:, lay.indicator.start] = (~null_mask).astype(float)
                out[:, lay.indicator.start + 1] = null_mask.astype(float)

        for lay in self.discrete_:
            cells = table.column(lay.name)
            index = {c: i for i, c in enumerate(lay.categories)}
            onehot = np.zeros((n, lay.width))
            for i, v in enumerate(cells):
                if v is None:
                    if not lay.has_null_slot:
                        raise EncodingError(
                            f"nulls in non-nullable column {lay.name!r}"
                        )
                    onehot[i, lay.width - 1] = 1.0
                else:
                    j = index.get(v)
                    if j is None:
                        raise EncodingError(
                            f"column {lay.name!r}: category {v!r} not in encoder"
                        )
                    onehot[i, j] = 1.0
            if self.category_noise > 0:
                onehot += rng.uniform(0.0, self.category_noise, size=onehot.shape)
                onehot /= onehot.sum(axis=1, keepdims=True)
            out[:, lay.block] = onehot

        return EncodedMatrix(out, n)

    def inverse_transform(self, matrix) -> Table:
        self._check_fitted()
        data = matrix.data if isinstance(matrix, EncodedMatrix) else np.asarray(matrix)
        if data.ndim != 2 or data.shape[1] != self.width_:
            raise EncodingError(
                f"matrix width {data.shape[-1]} does not match encoder width {self.width_}"
            )
        if np.isnan(data).any():
            raise EncodingError("matrix contains NaN entries")
        columns: dict[str, list] = {}

        for lay in self.numeric_:
            mixture = self._mixtures[lay.name]
            n_spec = len(lay.specials)
            block = data[:, lay.block]
            modes = np.argmax(block, axis=1)
            scal = data[:, lay.value_col]
            values = np.empty(data.shape[0])
            spec_mask = modes < n_spec
            if n_spec:
                values[spec_mask] = np.array(lay.specials)[modes[spec_mask]]
            gmask = ~spec_mask
            if gmask.any():
                k = modes[gmask] - n_spec
                values[gmask] = (
                    scal[gmask] * self.mode_span * mixture.stds_[k] + mixture.means_[k]
                )
            if lay.bounds is not None:
                values = np.clip(values, lay.bounds[0], lay.bounds[1])
            cells: list = [float(v) for v in values]
            if lay.indicator is not None:
                nulls = data[:, lay.indicator.start + 1] >= 0.5
                for i in np.nonzero(nulls)[0]:
                    cells[i] = None
            columns[lay.name] = cells

        for lay in self.discrete_:
            block = data[:, lay.block]
            idx = np.argmax(block, axis=1)
            cells = []
            for j in idx:
                if lay.has_null_slot and j == lay.width - 1:
                    cells.append(None)
                else:
                    cells.append(lay.categories[j])
            columns[lay.name] = cells

        return Table(self.schema_, columns)

    # -- layout queries -----------------------------------------------------

    def output_blocks(self) -> list[tuple[int, int, str]]:
        """(start, stop, kind) segments for the generator output activation."""
        self._check_fitted()
        segments = []
        for lay in self.numeric_:
            segments.append((lay.value_col, lay.value_col + 1, "tanh"))
            segments.append((lay.block.start, lay.block.stop, "softmax"))
        for lay in self.discrete_:
            segments.append((lay.block.start, lay.block.stop, "softmax"))
        for lay in self.numeric_:
            if lay.indicator is not None:
                segments.append((lay.indicator.start, lay.indicator.stop, "softmax"))
        return segments

    def mode_blocks(self) -> list[slice]:
        """Mode blocks of numeric columns (first sum in the KL penalty)."""
        return [lay.block for lay in self.numeric_]

    def discrete_blocks(self) -> list[slice]:
        """One-hot blocks of discrete columns (second sum in the KL penalty)."""
        return [lay.block for lay in self.discrete_]

    def check_matrix(self, matrix, tol: float = 1e-6) -> None:
        """Assert the probability-block and finiteness invariants."""
        data = matrix.data if isinstance(matrix, EncodedMatrix) else np.asarray(matrix)
        if not np.all(np.isfinite(data)):
            raise EncodingError("matrix has non-finite entries")
        blocks = [lay.block for lay in self.numeric_]
        blocks += [lay.block for lay in self.discrete_]
        blocks += [lay.indicator for lay in self.numeric_ if lay.indicator is not None]
        for blk in blocks:
            sub = data[:, blk]
            if (sub < -tol).any():
                raise EncodingError("negative entry in a probability block")
            if np.abs(sub.sum(axis=1) - 1.0).max() > tol:
                raise EncodingError("probability block does not sum to 1")

    def _check_fitted(self):
        if not hasattr(self, "width_"):
            raise RuntimeError("encoder is not fitted")

    # -- persistence ----------------------------------------------------

    envelope_kind = "table_encoder"

    def to_payload(self) -> dict:
        self._check_fitted()
        numeric = []
        for lay in self.numeric_:
            mixture = self._mixtures[lay.name]
            numeric.append({
                "name": lay.name,
                "value_col": lay.value_col,
                "block": [lay.block.start, lay.block.stop],
                "specials": list(lay.specials),
                "bounds": list(lay.bounds) if lay.bounds else None,
                "nullable": lay.nullable,
                "indicator": (
                    [lay.indicator.start, lay.indicator.stop]
                    if lay.indicator else None
                ),
                "mixture": None if mixture is None else {
                    "weights": io_mod.encode_array(mixture.weights_),
                    "means": io_mod.encode_array(mixture.means_),
                    "stds": io_mod.encode_array(mixture.stds_),
                    "sigma_floor": mixture.sigma_floor_,
                    "kde_modes": mixture.kde_modes_,
                    "max_modes": mixture.max_modes,
                    "seed": mixture.seed,
                },
                "fill_pool": io_mod.encode_array(self._fill_pools[lay.name]),
            })
        discrete = [
            {
                "name": lay.name,
                "categories": list(lay.categories),
                "block": [lay.block.start, lay.block.stop],
                "has_null_slot": lay.has_null_slot,
            }
            for lay in self.discrete_
        ]
        return {
            "params": {
                "mode_span": self.mode_span,
                "category_noise": self.category_noise,
                "max_modes": self.max_modes,
                "seed": self.seed,
            },
            "schema": io_mod.SchemaConfig.from_schema(self.schema_).to_dict(),
            "width": self.width_,
            "numeric": numeric,
            "discrete": discrete,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "TableEncoder":
        enc = cls(**payload["params"])
        enc.schema_ = io_mod.SchemaConfig.from_dict(payload["schema"]).to_schema()
        enc.width_ = int(payload["width"])
        enc.numeric_ = []
        enc.discrete_ = []
        enc._mixtures = {}
        enc._fill_pools = {}
        for doc in payload["numeric"]:
            mixture = None
            if doc["mixture"] is not None:
                m = doc["mixture"]
                mixture = GaussianMixture1D(
                    max_modes=int(m["max_modes"]), seed=int(m["seed"])
                )
                mixture.weights_ = io_mod.decode_array(m["weights"])
                mixture.means_ = io_mod.decode_array(m["means"])
                mixture.stds_ = io_mod.decode_array(m["stds"])
                mixture.sigma_floor_ = float(m["sigma_floor"])
                mixture.kde_modes_ = int(m["kde_modes"])
                mixture.n_modes_ = int(mixture.weights_.size)
                mixture.loglik_path_ = []
            enc._mixtures[doc["name"]] = mixture
            enc._fill_pools[doc["name"]] = io_mod.decode_array(doc["fill_pool"])
            enc.numeric_.append(NumericColumnLayout(
                name=doc["name"],
                value_col=int(doc["value_col"]),
                block=slice(*doc["block"]),
                specials=tuple(doc["specials"]),
                bounds=tuple(doc["bounds"]) if doc["bounds"] else None,
                nullable=bool(doc["nullable"]),
                indicator=slice(*doc["indicator"]) if doc["indicator"] else None,
            ))
        for doc in payload["discrete"]:
            enc.discrete_.append(DiscreteColumnLayout(
                name=doc["name"],
                categories=tuple(doc["categories"]),
                block=slice(*doc["block"]),
                has_null_slot=bool(doc["has_null_slot"]),
            ))
        return enc


io_mod.register_loader("table_encoder")(TableEncoder.from_payload)


def expected_width(schema: TableSchema, mode_counts: dict[str, int]) -> int:
    """Independent width formula: numeric columns contribute 1 + modes
    (+2 when nullable), discrete columns their category count (+1 when
    nullable). ``mode_counts`` maps numeric column name to its total mode
    count, special values included."""
    width = 0
    for col in schema:
        if is_numeric_kind(col.kind):
            width += 1 + mode_counts[col.name] + (2 if col.nullable else 0)
        else:
            width += len(col.kind.categories) + (1 if col.nullable else 0)
    return width
