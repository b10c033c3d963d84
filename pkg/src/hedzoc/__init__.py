"""Decentralized zeroth-order optimization with compressed communication.

The package simulates networks of agents that minimize an average of local
objectives using only noisy function evaluations, exchanging compressed
difference vectors over a fixed undirected graph. Alongside the simulator it
provides the contractive-compressor toolbox, gradient estimators, stepsize
schedules, the derived-constants calculator with Lyapunov diagnostics,
synthetic problem families with tunable heterogeneity, and an experiment
harness with a CLI.
"""
from .algorithm import (
    MODE_NONCONVEX,
    MODE_PL_KNOWN,
    MODE_PL_UNKNOWN,
    MODES,
    AgentStates,
    InvariantViolation,
    RunTrace,
    Schedule,
    init_states,
    make_schedule,
    neighbor_sum,
    neighbor_views,
    run,
    run_uncompressed,
    step,
)
from .analysis import (
    ConstantsInput,
    ConstantsOutput,
    LyapunovSnapshot,
    admissible_eps3,
    constants,
    family_constants_input,
    horizon_floor,
    lyapunov,
)
from .compressors import (
    B1_DEFAULT,
    CompressorKind,
    CompressorSpec,
    compress,
    contraction_estimate,
    format_compressor,
    params_for,
    parse_compressor,
)
from .estimators import (
    StochasticOracle,
    VarianceProbe,
    coordinate_wise,
    gaussian_multi,
    sample_unit_sphere,
    two_point,
    variance_probe,
)
from .graph import (
    Graph,
    MixingMatrices,
    Spectrum,
    centering_matrix,
    complete,
    edge_list_str,
    erdos_renyi,
    f_matrix,
    graph_from_edge_list,
    laplacian,
    laplacian_spectrum,
    mixing_matrices,
    ring,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    RateFit,
    SweepResult,
    build_experiment,
    check_experiment,
    parse_config,
    rate_fit,
    run_experiment,
    sweep,
    trace_csv_lines,
)
from .problems import (
    FAMILY_KINDS,
    AssumptionReport,
    ProblemFamily,
    assumption_check,
    family_from_text,
    family_to_text,
    heterogeneity_dispersion,
    make_family,
    set_global_reference,
)
from .rng import agent_streams, stream

__version__ = "0.1.0"

__all__ = [
    "AgentStates",
    "AssumptionReport",
    "B1_DEFAULT",
    "CompressorKind",
    "CompressorSpec",
    "ConfigError",
    "ConstantsInput",
    "ConstantsOutput",
    "ExperimentConfig",
    "FAMILY_KINDS",
    "Graph",
    "InvariantViolation",
    "LyapunovSnapshot",
    "MixingMatrices",
    "MODE_NONCONVEX",
    "MODE_PL_KNOWN",
    "MODE_PL_UNKNOWN",
    "MODES",
    "ProblemFamily",
    "RateFit",
    "RunTrace",
    "Schedule",
    "Spectrum",
    "StochasticOracle",
    "SweepResult",
    "VarianceProbe",
    "admissible_eps3",
    "agent_streams",
    "assumption_check",
    "build_experiment",
    "centering_matrix",
    "check_experiment",
    "complete",
    "compress",
    "constants",
    "contraction_estimate",
    "coordinate_wise",
    "edge_list_str",
    "erdos_renyi",
    "f_matrix",
    "family_constants_input",
    "family_from_text",
    "family_to_text",
    "format_compressor",
    "gaussian_multi",
    "graph_from_edge_list",
    "heterogeneity_dispersion",
    "horizon_floor",
    "init_states",
    "laplacian",
    "laplacian_spectrum",
    "lyapunov",
    "make_family",
    "make_schedule",
    "mixing_matrices",
    "neighbor_sum",
    "neighbor_views",
    "params_for",
    "parse_compressor",
    "parse_config",
    "rate_fit",
    "ring",
    "run",
    "run_experiment",
    "run_uncompressed",
    "sample_unit_sphere",
    "set_global_reference",
    "step",
    "stream",
    "sweep",
    "trace_csv_lines",
    "two_point",
    "variance_probe",
]
