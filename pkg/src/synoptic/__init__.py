"""Desk-scale approximate query processing on data synopses.

Builds synopses of relational tables by classic statistical methods
(reservoir sample, equi-width histogram, Haar wavelet, count-min sketch)
and by a from-scratch conditional tabular GAN, answers aggregate queries
on them, and scores synopsis fidelity with a statistical metric suite.
"""

from . import quality, synopses  # noqa: F401  (registers envelope loaders)
from .encoding import EncodedMatrix, TableEncoder, expected_width
from .gan import (
    ConditionSampler,
    GanConfig,
    GanSynthesizer,
    condition_penalty,
    classifier_penalty,
    discriminator_loss,
    generator_score_loss,
    info_penalty,
    kl_marginal_penalty,
    train,
)
from .gmm import GaussianMixture1D, estimate_mode_count, silverman_bandwidth
from .io import (
    SchemaConfig,
    infer_schema,
    load,
    load_schema_config,
    persist,
    read_csv,
    save_schema_config,
    write_csv,
)
from .model import (
    Categorical,
    ColumnSchema,
    Continuous,
    Mixed,
    Ordinal,
    Table,
    TableSchema,
    ValidationReport,
    validate_table,
)
from .nn import (
    AdamState,
    BlockActivation,
    Gradients,
    Layer,
    Mlp,
    adam_step,
    backward,
    forward,
    grad_check,
    grad_check_params,
    gradient_penalty,
    init_mlp,
    input_gradient,
)
from .quality import (
    MetricScore,
    QualityReport,
    boundary_adherence,
    cardinality_similarity,
    category_coverage,
    contingency_similarity,
    correlation_similarity,
    ks_complement,
    missing_value_similarity,
    quality_report,
    range_coverage,
    statistic_similarity,
    tvd_complement,
)
from .query import (
    ApproxResult,
    ErrorReport,
    QueryAst,
    QueryResult,
    compare_results,
    execute_approx,
    execute_exact,
    parse_query,
)
from .synopses import (
    GeneratedSynopsis,
    HistogramSynopsis,
    SampleSynopsis,
    SketchSynopsis,
    WaveletSynopsis,
    build_histogram,
    build_sketch,
    build_wavelet,
    cms_insert_all,
    cms_query,
    haar_inverse,
    haar_transform,
    reservoir_sample,
    wavelet_build,
    wavelet_reconstruct,
)

__version__ = "0.1.0"
