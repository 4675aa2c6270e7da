"""Adversarial training of tabular generators over encoded tables.

The synthesizer owns a from-scratch training loop: a generator maps noise
(plus an optional condition vector) to an encoded row, a discriminator or
critic scores encoded rows, and the enabled loss terms shape the gradient
that flows back through both networks. Supported terms:

* vanilla minimax loss (non-saturating generator form) or Wasserstein
  critic loss with a gradient-norm penalty;
* KL divergence between batch-marginal block distributions of generated
  and real rows;
* hinge penalties on the distance between first/second-order statistics
  of discriminator features (information loss);
* cross-entropy between the imposed condition and the generated block
  (conditional generation with training-by-sampling);
* disagreement between the generated target block and a classifier
  trained on real rows.

Everything is driven by one seeded generator, so runs are reproducible
bit for bit on a platform.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import io as io_mod
from .encoding import EncodedMatrix, TableEncoder
from .model import Table, is_discrete_kind
from .nn import (
    AdamState,
    BlockActivation,
    Gradients,
    Layer,
    Mlp,
    adam_step,
    backward,
    forward,
    gradient_penalty,
    init_mlp,
    zero_gradients,
)

SCORE_CLAMP = 1e-7
KL_SMOOTHING = 1e-8


class TrainingError(RuntimeError):
    """Raised when training encounters a non-finite loss term."""


class GenerationError(ValueError):
    """Raised for invalid generation requests."""


@dataclass(frozen=True)
class GanConfig:
    loss_variant: str = "wgan_gp"  # vanilla | wgan_gp
    conditional: bool = True
    kl_penalty: bool = False
    info_loss: bool = False
    mean_slack: float = 0.0
    sd_slack: float = 0.0
    classifier_loss: bool = False
    gp_weight: float = 10.0
    noise_dim: int = 64
    batch_size: int = 128
    epochs: int = 300
    critic_steps: int = 5
    label_smoothing: bool = False
    cond_pmf: str = "log"  # log | raw
    generator_dims: tuple[int, ...] = (256, 256)
    discriminator_dims: tuple[int, ...] = (256, 256)
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    seed: int = 0

    def validate(self) -> None:
        if self.loss_variant not in ("vanilla", "wgan_gp"):
            raise ValueError(f"unknown loss variant {self.loss_variant!r}")
        if self.gp_weight < 0:
            raise ValueError("gradient penalty weight must be non-negative")
        if self.cond_pmf not in ("log", "raw"):
            raise ValueError(f"unknown condition PMF {self.cond_pmf!r}")
        if self.batch_size < 1 or self.epochs < 0 or self.critic_steps < 1:
            raise ValueError("batch_size/epochs/critic_steps out of range")


# ---------------------------------------------------------------------------
# score losses


def _clamped(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    clamped = np.clip(scores, SCORE_CLAMP, 1.0 - SCORE_CLAMP)
    active = (scores > SCORE_CLAMP) & (scores < 1.0 - SCORE_CLAMP)
    return clamped, active.astype(np.float64)


def discriminator_loss(variant: str, real_scores: np.ndarray,
                       fake_scores: np.ndarray,
                       gp_term: Optional[float] = None):
    """Scalar loss plus gradients w.r.t. both score batches.

    vanilla: -(mean log D(x) + mean log(1 - D(G(z)))) with scores clamped
    away from 0 and 1. wgan_gp: mean D(G(z)) - mean D(x); the penalty value
    may be passed in to be included in the reported scalar (its parameter
    gradients are computed against the interpolates, not the scores).
    """
    r = np.asarray(real_scores, dtype=np.float64)
    f = np.asarray(fake_scores, dtype=np.float64)
    if r.size == 0 or f.size == 0:
        raise ValueError("empty score batch")
    if variant == "vanilla":
        rc, r_act = _clamped(r)
        fc, f_act = _clamped(f)
        loss = -(float(np.mean(np.log(rc))) + float(np.mean(np.log(1.0 - fc))))
        d_real = -r_act / (r.size * rc)
        d_fake = f_act / (f.size * (1.0 - fc))
    elif variant == "wgan_gp":
        loss = float(np.mean(f)) - float(np.mean(r))
        d_real = np.full_like(r, -1.0 / r.size)
        d_fake = np.full_like(f, 1.0 / f.size)
    else:
        raise ValueError(f"unknown loss variant {variant!r}")
    if gp_term is not None:
        loss += gp_term
    return loss, d_real, d_fake


def generator_score_loss(variant: str, fake_scores: np.ndarray):
    """Base generator term: non-saturating -mean log D(G(z)), or
    -mean D(G(z)) for a critic."""
    f = np.asarray(fake_scores, dtype=np.float64)
    if f.size == 0:
        raise ValueError("empty score batch")
    if variant == "vanilla":
        fc, f_act = _clamped(f)
        return -float(np.mean(np.log(fc))), -f_act / (f.size * fc)
    if variant == "wgan_gp":
        return -float(np.mean(f)), np.full_like(f, -1.0 / f.size)
    raise ValueError(f"unknown loss variant {variant!r}")


# ---------------------------------------------------------------------------
# generator penalty terms


def kl_marginal_penalty(fake_rows: np.ndarray, real_rows: np.ndarray,
                        blocks: Sequence[slice], eps: float = KL_SMOOTHING):
    """Sum over blocks of KL(generated marginal || real marginal).

    Marginals are the batch means of each probability block; zero-mass bins
    are guarded by additive smoothing.
    """
    n = fake_rows.shape[0]
    total = 0.0
    grad = np.zeros_like(fake_rows)
    for blk in blocks:
        width = blk.stop - blk.start
        z = 1.0 + width * eps
        p = (fake_rows[:, blk].mean(axis=0) + eps) / z
        q = (real_rows[:, blk].mean(axis=0) + eps) / z
        total += float(np.sum(p * np.log(p / q)))
        grad[:, blk] = (np.log(p / q) + 1.0)[None, :] / (n * z)
    return total, grad


def info_penalty(real_features: np.ndarray, fake_features: np.ndarray,
                 mean_slack: float = 0.0, sd_slack: float = 0.0):
    """Hinge penalties on the L2 gaps between feature means and stds."""
    n = fake_features.shape[0]
    mu_r = real_features.mean(axis=0)
    mu_f = fake_features.mean(axis=0)
    sd_r = real_features.std(axis=0)
    sd_f = fake_features.std(axis=0)
    l_mean = float(np.linalg.norm(mu_r - mu_f))
    l_sd = float(np.linalg.norm(sd_r - sd_f))
    loss = max(0.0, l_mean - mean_slack) + max(0.0, l_sd - sd_slack)
    grad = np.zeros_like(fake_features)
    if l_mean > mean_slack and l_mean > 0:
        grad += ((mu_f - mu_r) / (l_mean * n))[None, :]
    if l_sd > sd_slack and l_sd > 0:
        safe_sd = np.maximum(sd_f, 1e-12)
        coeff = (sd_f - sd_r) / (l_sd * n * safe_sd)
        grad += coeff[None, :] * (fake_features - mu_f[None, :])
    return loss, grad


def condition_penalty(fake_rows: np.ndarray, slots: np.ndarray):
    """Mean cross-entropy between the imposed condition mask and the
    generated block: -log of the generated probability at the imposed slot."""
    n = fake_rows.shape[0]
    rows = np.arange(n)
    p = np.maximum(fake_rows[rows, slots], 1e-12)
    loss = float(np.mean(-np.log(p)))
    grad = np.zeros_like(fake_rows)
    grad[rows, slots] = -1.0 / (n * p)
    return loss, grad


def classifier_penalty(label_probs: np.ndarray, classifier_probs: np.ndarray):
    """Disagreement between the generated target block and the classifier
    prediction from the remaining features: per-row total variation,
    which reduces to |l - C| for a binary target."""
    n = label_probs.shape[0]
    diff = label_probs - classifier_probs
    loss = float(np.abs(diff).sum(axis=1).mean()) / 2.0
    d_label = np.sign(diff) / (2.0 * n)
    return loss, d_label, -d_label


# ---------------------------------------------------------------------------
# conditional vectors


@dataclass
class CondVector:
    vector: np.ndarray
    column: int
    category: int


class ConditionSampler:
    """Draws condition vectors and the matching real rows.

    A discrete column is chosen uniformly; a category is drawn from a PMF
    proportional to log(1 + count) (or the raw count), which lifts minority
    categories into view during training. The vector is the concatenation
    of per-column mask blocks with exactly one slot set.
    """

    def __init__(self, columns: list[tuple[str, tuple[str, ...], int]],
                 counts: list[np.ndarray], pmf: str = "log"):
        # columns: (name, categories, encoded block start)
        self.columns = columns
        self.counts = [np.asarray(c, dtype=np.float64) for c in counts]
        self.pmf = pmf
        self.offsets = []
        off = 0
        for _, cats, _ in columns:
            self.offsets.append(off)
            off += len(cats)
        self.width = off
        self._probs = []
        for c in self.counts:
            w = np.log1p(c) if pmf == "log" else c.astype(np.float64)
            total = w.sum()
            self._probs.append(w / total if total > 0 else np.full_like(w, 1.0 / w.size))
        self._raw_probs = []
        for c in self.counts:
            total = c.sum()
            self._raw_probs.append(
                c / total if total > 0 else np.full_like(c, 1.0 / c.size)
            )

    @classmethod
    def from_table(cls, encoder: TableEncoder, table: Table, pmf: str = "log"):
        columns = []
        counts = []
        pools = {}
        for lay in encoder.discrete_:
            cats = lay.categories
            columns.append((lay.name, cats, lay.block.start))
            cells = table.column(lay.name)
            col_counts = np.zeros(len(cats))
            col_pools = []
            for j, cat in enumerate(cats):
                idx = np.array([i for i, v in enumerate(cells) if v == cat], dtype=int)
                col_counts[j] = idx.size
                col_pools.append(idx)
            counts.append(col_counts)
            pools[len(columns) - 1] = col_pools
        sampler = cls(columns, counts, pmf)
        sampler.row_pools = pools
        return sampler

    def make_vector(self, column: int, category: int) -> CondVector:
        vec = np.zeros(self.width)
        vec[self.offsets[column] + category] = 1.0
        return CondVector(vec, column, category)

    def sample(self, rng) -> CondVector:
        column = int(rng.integers(len(self.columns)))
        category = int(rng.choice(len(self._probs[column]), p=self._probs[column]))
        return self.make_vector(column, category)

    def sample_batch(self, rng, n: int):
        vectors = np.zeros((n, self.width))
        cols = np.empty(n, dtype=int)
        cats = np.empty(n, dtype=int)
        for i in range(n):
            cv = self.sample(rng)
            vectors[i] = cv.vector
            cols[i] = cv.column
            cats[i] = cv.category
        return vectors, cols, cats

    def sample_batch_raw(self, rng, n: int):
        """Conditions proportional to raw category frequencies, used at
        generation time so real marginals are reproduced."""
        vectors = np.zeros((n, self.width))
        cols = np.empty(n, dtype=int)
        cats = np.empty(n, dtype=int)
        for i in range(n):
            column = int(rng.integers(len(self.columns)))
            category = int(
                rng.choice(len(self._raw_probs[column]), p=self._raw_probs[column])
            )
            vectors[i, self.offsets[column] + category] = 1.0
            cols[i] = column
            cats[i] = category
        return vectors, cols, cats

    def vector_for(self, column_name: str, category_token: str) -> CondVector:
        for i, (name, cats, _) in enumerate(self.columns):
            if name == column_name:
                if category_token not in cats:
                    raise GenerationError(
                        f"unknown category {category_token!r} for column {name!r}"
                    )
                return self.make_vector(i, cats.index(category_token))
        raise GenerationError(f"unknown condition column {column_name!r}")

    def encoded_slot(self, column: int, category: int) -> int:
        """Absolute index of the imposed category inside an encoded row."""
        return self.columns[column][2] + category

    def to_payload(self) -> dict:
        return {
            "columns": [
                {"name": name, "categories": list(cats), "block_start": start}
                for name, cats, start in self.columns
            ],
            "counts": [[float(v) for v in c] for c in self.counts],
            "pmf": self.pmf,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ConditionSampler":
        columns = [
            (d["name"], tuple(d["categories"]), int(d["block_start"]))
            for d in payload["columns"]
        ]
        counts = [np.array(c) for c in payload["counts"]]
        return cls(columns, counts, payload.get("pmf", "log"))


# ---------------------------------------------------------------------------
# the synthesizer


class GanSynthesizer(BaseEstimator):
    """Trains a tabular generator and samples schema-valid tables.

    Construction only records hyperparameters; ``fit`` encodes the table,
    builds the networks, and runs the adversarial loop. ``sample`` decodes
    generator output back into a table that passes validation.
    """

    def __init__(self, loss: str = "wgan_gp", conditional: bool = True,
                 kl_penalty: bool = False, info_loss: bool = False,
                 mean_slack: float = 0.0, sd_slack: float = 0.0,
                 classifier_loss: bool = False, gp_weight: float = 10.0,
                 noise_dim: int = 64, batch_size: int = 128, epochs: int = 300,
                 critic_steps: int = 5, label_smoothing: bool = False,
                 cond_pmf: str = "log",
                 generator_dims: tuple[int, ...] = (256, 256),
                 discriminator_dims: tuple[int, ...] = (256, 256),
                 learning_rate: float = 2e-4, beta1: float = 0.5,
                 beta2: float = 0.9, mode_span: float = 4.0,
                 category_noise: float = 0.2, max_modes: int = 10,
                 seed: int = 0):
        self.loss = loss
        self.conditional = conditional
        self.kl_penalty = kl_penalty
        self.info_loss = info_loss
        self.mean_slack = mean_slack
        self.sd_slack = sd_slack
        self.classifier_loss = classifier_loss
        self.gp_weight = gp_weight
        self.noise_dim = noise_dim
        self.batch_size = batch_size
        self.epochs = epochs
        self.critic_steps = critic_steps
        self.label_smoothing = label_smoothing
        self.cond_pmf = cond_pmf
        self.generator_dims = generator_dims
        self.discriminator_dims = discriminator_dims
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.mode_span = mode_span
        self.category_noise = category_noise
        self.max_modes = max_modes
        self.seed = seed

    # -- configuration --------------------------------------------------

    def _build_config(self) -> GanConfig:
        config = GanConfig(
            loss_variant=self.loss,
            conditional=self.conditional,
            kl_penalty=self.kl_penalty,
            info_loss=self.info_loss,
            mean_slack=self.mean_slack,
            sd_slack=self.sd_slack,
            classifier_loss=self.classifier_loss,
            gp_weight=self.gp_weight,
            noise_dim=self.noise_dim,
            batch_size=self.batch_size,
            epochs=self.epochs,
            critic_steps=self.critic_steps,
            label_smoothing=self.label_smoothing,
            cond_pmf=self.cond_pmf,
            generator_dims=tuple(self.generator_dims),
            discriminator_dims=tuple(self.discriminator_dims),
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            seed=self.seed,
        )
        config.validate()
        return config

    # -- training ---------------------------------------------------------

    def fit(self, table: Table, encoder: Optional[TableEncoder] = None):
        config = self._build_config()
        if config.conditional and not table.schema.discrete_columns():
            raise ValueError("conditional training needs a discrete column")
        target = table.schema.target_column()
        if config.classifier_loss:
            if target is None:
                raise ValueError("classifier loss needs a column marked target")
            if not is_discrete_kind(target.kind):
                raise ValueError("classifier loss needs a discrete target column")

        if encoder is None:
            encoder = TableEncoder(
                mode_span=self.mode_span,
                category_noise=self.category_noise,
                max_modes=self.max_modes,
                seed=self.seed,
            ).fit(table)
        self.encoder_ = encoder
        data = encoder.transform(table, seed=self.seed).data
        n = data.shape[0]
        if n < 2 * config.batch_size:
            raise ValueError(
                f"need at least {2 * config.batch_size} rows, got {n}"
            )

        rng = np.random.default_rng(config.seed)
        width = encoder.width_
        self.sampler_ = (
            ConditionSampler.from_table(encoder, table, config.cond_pmf)
            if config.conditional else None
        )
        cond_width = self.sampler_.width if self.sampler_ else 0

        out_act = BlockActivation(tuple(encoder.output_blocks()))
        g_dims = [config.noise_dim + cond_width, *config.generator_dims, width]
        g_acts = ["leaky_relu"] * len(config.generator_dims) + [out_act]
        self.generator_ = init_mlp(g_dims, g_acts, rng)

        d_final = "sigmoid" if config.loss_variant == "vanilla" else "linear"
        d_dims = [width + cond_width, *config.discriminator_dims, 1]
        d_acts = ["leaky_relu"] * len(config.discriminator_dims) + [d_final]
        self.discriminator_ = init_mlp(d_dims, d_acts, rng)

        self.classifier_ = None
        self._target_block = None
        self._feature_idx = None
        if config.classifier_loss:
            lay = next(l for l in encoder.discrete_ if l.name == target.name)
            self._target_block = lay.block
            self._feature_idx = np.array(
                [i for i in range(width) if not lay.block.start <= i < lay.block.stop]
            )
            t_width = lay.width
            c_dims = [width - t_width, *config.discriminator_dims, t_width]
            c_acts = ["leaky_relu"] * len(config.discriminator_dims) + [
                BlockActivation(((0, t_width, "softmax"),))
            ]
            self.classifier_ = init_mlp(c_dims, c_acts, rng)

        adam_kw = dict(lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2)
        g_opt = AdamState.for_net(self.generator_, **adam_kw)
        d_opt = AdamState.for_net(self.discriminator_, **adam_kw)
        c_opt = (
            AdamState.for_net(self.classifier_, **adam_kw)
            if self.classifier_ is not None else None
        )

        kl_blocks = encoder.mode_blocks() + encoder.discrete_blocks()
        smooth_blocks = encoder.discrete_blocks()
        steps = max(n // config.batch_size, 1)
        self.config_ = config
        self.log_ = []
        for epoch in range(config.epochs):
            sums: dict[str, float] = {}
            counts: dict[str, int] = {}

            def record(term: str, value: float):
                if not np.isfinite(value):
                    raise TrainingError(f"epoch {epoch}: non-finite {term} loss")
                sums[term] = sums.get(term, 0.0) + value
                counts[term] = counts.get(term, 0) + 1

            for _ in range(steps):
                for _ in range(config.critic_steps):
                    d_terms = self._disc_step(data, rng, config, d_opt, smooth_blocks)
                    for k, v in d_terms.items():
                        record(k, v)
                g_terms = self._gen_step(data, rng, config, g_opt, kl_blocks)
                for k, v in g_terms.items():
                    record(k, v)
                if self.classifier_ is not None:
                    record("clf_train", self._clf_step(data, rng, config, c_opt))
            self.log_.append(
                {"epoch": epoch, **{k: sums[k] / counts[k] for k in sorted(sums)}}
            )
        return self

    def _draw_batches(self, data, rng, config):
        """Fake-side condition vectors and the matching real rows."""
        b = config.batch_size
        if self.sampler_ is None:
            real_idx = rng.integers(0, data.shape[0], size=b)
            return None, None, None, data[real_idx]
        vectors, cols, cats = self.sampler_.sample_batch(rng, b)
        real_idx = np.empty(b, dtype=int)
        for i in range(b):
            pool = self.sampler_.row_pools[cols[i]][cats[i]]
            real_idx[i] = pool[rng.integers(pool.size)]
        return vectors, cols, cats, data[real_idx]

    def _smooth(self, rows, rng, config, blocks):
        if not config.label_smoothing or not blocks:
            return rows
        rows = rows.copy()
        for blk in blocks:
            noisy = rows[:, blk] + rng.uniform(
                0.0, self.category_noise, size=rows[:, blk].shape
            )
            rows[:, blk] = noisy / noisy.sum(axis=1, keepdims=True)
        return rows

    def _disc_step(self, data, rng, config, d_opt, smooth_blocks):
        z = rng.standard_normal((config.batch_size, config.noise_dim))
        cvec, _, _, real = self._draw_batches(data, rng, config)
        real = self._smooth(real, rng, config, smooth_blocks)
        g_in = z if cvec is None else np.hstack([z, cvec])
        fake = forward(self.generator_, g_in)[-1]
        real_in = real if cvec is None else np.hstack([real, cvec])
        fake_in = fake if cvec is None else np.hstack([fake, cvec])
        acts_r = forward(self.discriminator_, real_in)
        acts_f = forward(self.discriminator_, fake_in)
        loss, d_real, d_fake = discriminator_loss(
            config.loss_variant, acts_r[-1], acts_f[-1]
        )
        grads, _ = backward(self.discriminator_, acts_r, d_real)
        grads_f, _ = backward(self.discriminator_, acts_f, d_fake)
        grads.add(grads_f)
        terms = {"disc": loss}
        if config.loss_variant == "wgan_gp" and config.gp_weight > 0:
            u = rng.uniform(0.0, 1.0, size=(config.batch_size, 1))
            interp = u * real_in + (1.0 - u) * fake_in
            pen, pen_grads = gradient_penalty(
                self.discriminator_, interp, config.gp_weight
            )
            grads.add(pen_grads)
            terms["grad_penalty"] = pen
        adam_step(d_opt, self.discriminator_, grads)
        return terms

    def _gen_step(self, data, rng, config, g_opt, kl_blocks):
        z = rng.standard_normal((config.batch_size, config.noise_dim))
        cvec, cols, cats, real = self._draw_batches(data, rng, config)
        g_in = z if cvec is None else np.hstack([z, cvec])
        acts_g = forward(self.generator_, g_in)
        fake = acts_g[-1]
        fake_in = fake if cvec is None else np.hstack([fake, cvec])
        acts_d = forward(self.discriminator_, fake_in)
        base, d_scores = generator_score_loss(config.loss_variant, acts_d[-1])
        terms = {"gen": base}

        inject = None
        if config.info_loss:
            real_in = real if cvec is None else np.hstack([real, cvec])
            acts_dr = forward(self.discriminator_, real_in)
            value, d_feat = info_penalty(
                acts_dr[-2], acts_d[-2], config.mean_slack, config.sd_slack
            )
            terms["info"] = value
            inject = {len(self.discriminator_.layers) - 1: d_feat}
        _, d_input = backward(self.discriminator_, acts_d, d_scores, inject=inject)
        d_rows = d_input[:, : self.encoder_.width_]

        if config.kl_penalty:
            value, grad = kl_marginal_penalty(fake, real, kl_blocks)
            terms["kl"] = value
            d_rows = d_rows + grad
        if self.sampler_ is not None:
            slots = np.array(
                [self.sampler_.encoded_slot(c, k) for c, k in zip(cols, cats)]
            )
            value, grad = condition_penalty(fake, slots)
            terms["cond_xent"] = value
            d_rows = d_rows + grad
        if self.classifier_ is not None:
            fe = fake[:, self._feature_idx]
            acts_c = forward(self.classifier_, fe)
            value, d_label, d_cprobs = classifier_penalty(
                fake[:, self._target_block], acts_c[-1]
            )
            terms["classifier"] = value
            _, d_fe = backward(self.classifier_, acts_c, d_cprobs)
            d_rows = d_rows.copy()
            d_rows[:, self._feature_idx] += d_fe
            d_rows[:, self._target_block] += d_label

        g_grads, _ = backward(self.generator_, acts_g, d_rows)
        adam_step(g_opt, self.generator_, g_grads)
        return terms

    def _clf_step(self, data, rng, config, c_opt) -> float:
        idx = rng.integers(0, data.shape[0], size=config.batch_size)
        rows = data[idx]
        labels = np.argmax(rows[:, self._target_block], axis=1)
        fe = rows[:, self._feature_idx]
        acts = forward(self.classifier_, fe)
        probs = np.maximum(acts[-1], 1e-12)
        picked = probs[np.arange(rows.shape[0]), labels]
        loss = float(np.mean(-np.log(picked)))
        d_out = np.zeros_like(acts[-1])
        d_out[np.arange(rows.shape[0]), labels] = -1.0 / (rows.shape[0] * picked)
        grads, _ = backward(self.classifier_, acts, d_out)
        adam_step(c_opt, self.classifier_, grads)
        return loss

    # -- generation ---------------------------------------------------------

    def sample(self, n: int, condition: Optional[tuple[str, str]] = None,
               seed: Optional[int] = None) -> Table:
        """Decode ``n`` generated rows into a schema-valid table.

        ``condition`` pins (column, category); without it a conditional
        model draws conditions proportional to the real category
        frequencies so marginals are reproduced.
        """
        self._check_fitted()
        if n < 1:
            raise GenerationError("n must be at least 1")
        config = self.config_
        rng = np.random.default_rng(self.seed + 1 if seed is None else seed)
        fixed = None
        if condition is not None:
            if self.sampler_ is None:
                raise GenerationError("model was not trained conditionally")
            fixed = self.sampler_.vector_for(condition[0], str(condition[1]))
        chunks = []
        produced = 0
        while produced < n:
            b = min(config.batch_size, n - produced)
            z = rng.standard_normal((b, config.noise_dim))
            if self.sampler_ is not None:
                if fixed is not None:
                    cvec = np.tile(fixed.vector, (b, 1))
                else:
                    cvec, _, _ = self.sampler_.sample_batch_raw(rng, b)
                g_in = np.hstack([z, cvec])
            else:
                g_in = z
            chunks.append(forward(self.generator_, g_in)[-1])
            produced += b
        matrix = np.vstack(chunks)
        return self.encoder_.inverse_transform(
            EncodedMatrix(matrix, matrix.shape[0])
        )

    def _check_fitted(self):
        if not hasattr(self, "generator_"):
            raise RuntimeError("synthesizer is not fitted")

    # -- persistence ----------------------------------------------------

    envelope_kind = "gan_model"

    def to_payload(self) -> dict:
        self._check_fitted()
        payload = {
            "params": _jsonable_params(self.get_params()),
            "config": _jsonable_params(asdict(self.config_)),
            "encoder": self.encoder_.to_payload(),
            "generator": _net_payload(self.generator_),
            "discriminator": _net_payload(self.discriminator_),
            "classifier": (
                _net_payload(self.classifier_) if self.classifier_ else None
            ),
            "target_block": (
                [self._target_block.start, self._target_block.stop]
                if self._target_block else None
            ),
            "sampler": self.sampler_.to_payload() if self.sampler_ else None,
            "log": self.log_,
        }
        return payload

    @classmethod
    def from_payload(cls, payload: dict) -> "GanSynthesizer":
        params = dict(payload["params"])
        for key in ("generator_dims", "discriminator_dims"):
            params[key] = tuple(params[key])
        model = cls(**params)
        model.config_ = GanConfig(**{
            **payload["config"],
            "generator_dims": tuple(payload["config"]["generator_dims"]),
            "discriminator_dims": tuple(payload["config"]["discriminator_dims"]),
        })
        model.encoder_ = TableEncoder.from_payload(payload["encoder"])
        model.generator_ = _net_from_payload(payload["generator"])
        model.discriminator_ = _net_from_payload(payload["discriminator"])
        model.classifier_ = (
            _net_from_payload(payload["classifier"]) if payload["classifier"] else None
        )
        if payload.get("target_block"):
            start, stop = payload["target_block"]
            model._target_block = slice(start, stop)
            model._feature_idx = np.array(
                [i for i in range(model.encoder_.width_) if not start <= i < stop]
            )
        else:
            model._target_block = None
            model._feature_idx = None
        model.sampler_ = (
            ConditionSampler.from_payload(payload["sampler"])
            if payload["sampler"] else None
        )
        model.log_ = payload.get("log", [])
        return model

    def training_log_csv(self) -> str:
        """Per-epoch loss terms as ``epoch,term,value`` lines."""
        lines = ["epoch,term,value"]
        for entry in self.log_:
            for term in sorted(k for k in entry if k != "epoch"):
                lines.append(f"{entry['epoch']},{term},{entry[term]!r}")
        return "\n".join(lines) + "\n"


def _jsonable_params(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, tuple):
            out[k] = list(v)
        elif isinstance(v, (np.integer,)):
            out[k] = int(v)
        elif isinstance(v, (np.floating,)):
            out[k] = float(v)
        else:
            out[k] = v
    return out


def _net_payload(net: Mlp) -> dict:
    layers = []
    for layer in net.layers:
        act = layer.activation
        layers.append({
            "weight": io_mod.encode_array(layer.weight),
            "bias": io_mod.encode_array(layer.bias),
            "activation": (
                {"blocks": [list(seg) for seg in act.segments]}
                if isinstance(act, BlockActivation) else act
            ),
        })
    return {"layers": layers}


def _net_from_payload(payload: dict) -> Mlp:
    layers = []
    for doc in payload["layers"]:
        act = doc["activation"]
        if isinstance(act, dict):
            act = BlockActivation(tuple(tuple(seg) for seg in act["blocks"]))
        layers.append(Layer(
            io_mod.decode_array(doc["weight"]),
            io_mod.decode_array(doc["bias"]),
            act,
        ))
    return Mlp(layers)


io_mod.register_loader("gan_model")(GanSynthesizer.from_payload)


def train(config: GanConfig, encoder: TableEncoder, table: Table) -> GanSynthesizer:
    """Functional wrapper: train a synthesizer from an explicit config."""
    synth = GanSynthesizer(
        loss=config.loss_variant,
        conditional=config.conditional,
        kl_penalty=config.kl_penalty,
        info_loss=config.info_loss,
        mean_slack=config.mean_slack,
        sd_slack=config.sd_slack,
        classifier_loss=config.classifier_loss,
        gp_weight=config.gp_weight,
        noise_dim=config.noise_dim,
        batch_size=config.batch_size,
        epochs=config.epochs,
        critic_steps=config.critic_steps,
        label_smoothing=config.label_smoothing,
        cond_pmf=config.cond_pmf,
        generator_dims=config.generator_dims,
        discriminator_dims=config.discriminator_dims,
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        seed=config.seed,
    )
    return synth.fit(table, encoder=encoder)
