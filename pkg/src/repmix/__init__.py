"""Bayesian mixtures of linear regressions with a repulsive prior on the
component coefficients, measured in the geometry of the fitted values.

The main entry points are :func:`run_rgrm` (and the comparison models in
:mod:`repmix.baselines`), :func:`evaluate` for clustering metrics, and
:func:`run_benchmark` for simulation studies.
"""

from .baselines import SidConfig, run_method, run_mfm, run_rgrm, run_rrm, run_sid
from .core import (
    ConfigError,
    Dataset,
    DimensionMismatchError,
    Draws,
    EstimateUnderflowError,
    KPrior,
    MixtureState,
    PriorConfig,
    ReproMixError,
    SingularDesignError,
    build_dataset,
    read_dataset_csv,
    state_summary,
    write_dataset_csv,
)
from .metrics import (
    EvalReport,
    ari,
    evaluate,
    k_hat,
    point_assignments,
    purity,
    relabel_draws,
    rmse_posthoc,
)
from .normalizer import (
    ZkTable,
    build_zk_table,
    estimate_zk,
    estimate_ztilde,
    theorem1_diagnostic,
)
from .repulsion import RepulsionKernel, g_func, h_k, pair_distance, whiten
from .sampler import (
    ChainConfig,
    VnCache,
    compute_vn,
    read_draws_jsonl,
    run_chain,
    write_draws_jsonl,
)
from .simbench import ScenarioSpec, gen_scenario, geometry_report, run_benchmark

__version__ = "0.1.0"


def toy_data_path():
    """Path of the bundled three-line example dataset (CSV with ``z_true``)."""
    from importlib.resources import files

    return files(__name__) / "data" / "toy.csv"


__all__ = [
    "ChainConfig", "ConfigError", "Dataset", "DimensionMismatchError", "Draws",
    "EstimateUnderflowError", "EvalReport", "KPrior", "MixtureState", "PriorConfig",
    "ReproMixError", "RepulsionKernel", "ScenarioSpec", "SidConfig", "SingularDesignError",
    "VnCache", "ZkTable", "ari", "build_dataset", "build_zk_table", "compute_vn",
    "estimate_zk", "estimate_ztilde", "evaluate", "g_func", "gen_scenario",
    "geometry_report", "h_k", "k_hat", "pair_distance", "point_assignments", "purity",
    "read_dataset_csv", "read_draws_jsonl", "relabel_draws", "rmse_posthoc", "run_benchmark",
    "run_chain", "run_method", "run_mfm", "run_rgrm", "run_rrm", "run_sid", "state_summary",
    "theorem1_diagnostic", "toy_data_path", "whiten", "write_dataset_csv", "write_draws_jsonl",
]
