"""Hybrid-array beamforming with quadratic-surface SVM direction finding.

The package models a cylindrical/circular hybrid antenna array, simulates
narrowband plane-wave snapshots, estimates directions of arrival with a
kernel-free quadratic-surface SVM over a class grid, and places beam nulls
with MVDR/LCMV weights.  A recursive Q-less QR solver and a fixed-point
datapath model cover the update and arithmetic layers, and a bench module
sweeps throughput, latency, and gain-pattern efficiency.
"""

from .beamform import (
    BeamPattern,
    BeamWeights,
    LcmvConstraints,
    beam_pattern,
    factor_covariance,
    lcmv_weights,
    mvdr_weights,
    null_depth,
    output_sinr,
)
from .errors import ConfigError, NumericalError, SolverError
from .fixedpoint import (
    FixedPointFormat,
    PipelineConfig,
    fx_inner_product,
    fx_tree_sum,
    quantize,
    quantize_vector,
)
from .geometry import (
    ArrayLayout,
    ArrayParams,
    SteeringVector,
    build_hybrid_layout,
    hybrid_steering_vector,
    steering_matrix,
    steering_vector,
    wavevector,
)
from .pipeline import (
    DoaGrid,
    DoaResult,
    Scenario,
    ScenarioSource,
    TrainConfig,
    run_doa,
    simulate_scenario,
    spectrum_features,
    synthesize_pattern,
    train_grid_model,
)
from .qrsolve import QlessQrState, absorb_rows, new_state, qless_update, solve_normal
from .qssvm import (
    QsSvmHyperparams,
    QsSvmModel,
    QuadraticSurface,
    featurize_snapshots,
    load_model,
    save_model,
    train_binary,
    train_multiclass,
)
from .signals import (
    CovarianceMatrix,
    NoiseSpec,
    SnapshotMatrix,
    SourceSpec,
    apply_awgn,
    collect_plane_waves,
    load_snapshots,
    sample_covariance,
    save_snapshots,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayLayout",
    "ArrayParams",
    "BeamPattern",
    "BeamWeights",
    "ConfigError",
    "CovarianceMatrix",
    "DoaGrid",
    "DoaResult",
    "FixedPointFormat",
    "LcmvConstraints",
    "NoiseSpec",
    "NumericalError",
    "PipelineConfig",
    "QlessQrState",
    "QsSvmHyperparams",
    "QsSvmModel",
    "QuadraticSurface",
    "Scenario",
    "ScenarioSource",
    "SnapshotMatrix",
    "SolverError",
    "SourceSpec",
    "SteeringVector",
    "TrainConfig",
    "absorb_rows",
    "apply_awgn",
    "beam_pattern",
    "build_hybrid_layout",
    "collect_plane_waves",
    "factor_covariance",
    "featurize_snapshots",
    "fx_inner_product",
    "fx_tree_sum",
    "hybrid_steering_vector",
    "lcmv_weights",
    "load_model",
    "load_snapshots",
    "mvdr_weights",
    "new_state",
    "null_depth",
    "output_sinr",
    "qless_update",
    "quantize",
    "quantize_vector",
    "run_doa",
    "sample_covariance",
    "save_model",
    "save_snapshots",
    "simulate_scenario",
    "solve_normal",
    "spectrum_features",
    "steering_matrix",
    "steering_vector",
    "synthesize_pattern",
    "train_binary",
    "train_grid_model",
    "train_multiclass",
    "wavevector",
]
