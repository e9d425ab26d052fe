"""Bayesian mixture-of-finite-mixtures sampler with a prior on component count.

Collapsed Gibbs sampling over partitions (urn-style reassignment plus
split-merge moves) under conjugate normal-gamma components, with the partition
prior induced by a prior on the number of components. Recorded draws give the
posterior over the component count k.
"""

from .chain import (
    HAVE_KERNEL,
    ChainConfig,
    ChainOutput,
    draw_k_given_t,
    gibbs_sweep,
    make_backend,
    resample_beta,
    run_chain,
    split_merge_move,
)
from .coefficients import (
    CoefficientTable,
    SeriesTruncationError,
    build_coefficient_table,
    log_V_ratio,
    posterior_k_given_partition,
)
from .configfile import ConfigError
from .datagen import (
    Component,
    ContaminationSpec,
    DatasetSeries,
    MixtureSpec,
    contaminate,
    empirical_hyperparams,
    load_matrix,
    log2_standardize,
    nested_series,
    sample_mixture,
    save_matrix,
)
from .diagnostics import (
    ExactPosterior,
    SupportViolationError,
    chain_stats,
    exact_posterior_k,
    mc_kl_estimate,
    rao_blackwell_posterior_k,
)
from .experiments import (
    ErrorRow,
    ResultRow,
    SweepConfig,
    generate_series,
    resolve_model,
    run_sweep,
    summarize,
    sweep_config_from_text,
    write_errors_csv,
    write_posterior_csv,
    write_summary_csv,
)
from .model import (
    BetaHyperprior,
    ModelConfig,
    SuffStats,
    cluster_log_marginal,
    log_predictive,
    mean_precision_scale,
    suffstats_add,
    suffstats_remove,
)
from .priors import CountPrior, Geometric, UniformBounded, log_prior_k
from .state import PartitionState, init_partition
from .tables import ChainTables, prepare_chain_tables

__version__ = "0.1.0"

__all__ = [
    "BetaHyperprior",
    "ChainConfig",
    "ChainOutput",
    "ChainTables",
    "CoefficientTable",
    "Component",
    "ConfigError",
    "ContaminationSpec",
    "CountPrior",
    "DatasetSeries",
    "ErrorRow",
    "ExactPosterior",
    "Geometric",
    "HAVE_KERNEL",
    "MixtureSpec",
    "ModelConfig",
    "PartitionState",
    "ResultRow",
    "SeriesTruncationError",
    "SuffStats",
    "SupportViolationError",
    "SweepConfig",
    "UniformBounded",
    "build_coefficient_table",
    "chain_stats",
    "cluster_log_marginal",
    "contaminate",
    "draw_k_given_t",
    "empirical_hyperparams",
    "exact_posterior_k",
    "generate_series",
    "gibbs_sweep",
    "init_partition",
    "load_matrix",
    "log2_standardize",
    "log_predictive",
    "log_prior_k",
    "log_V_ratio",
    "make_backend",
    "mc_kl_estimate",
    "mean_precision_scale",
    "nested_series",
    "posterior_k_given_partition",
    "prepare_chain_tables",
    "rao_blackwell_posterior_k",
    "resample_beta",
    "resolve_model",
    "run_chain",
    "run_sweep",
    "sample_mixture",
    "save_matrix",
    "split_merge_move",
    "suffstats_add",
    "suffstats_remove",
    "summarize",
    "sweep_config_from_text",
    "write_errors_csv",
    "write_posterior_csv",
    "write_summary_csv",
    "__version__",
]
