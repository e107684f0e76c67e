"""Deterministic simulator for decentralized nonconvex optimization over
time-varying directed networks: perturbed condensed push-sum consensus,
gradient tracking, DC sparsity regularizers, the SONATA family and its
special cases, plus baselines and an experiment harness."""

from .algorithm import (
    AlgorithmConfig,
    ConfigError,
    LyapunovDiagnostics,
    Mixing,
    Preset,
    StepBoundParams,
    StepRule,
    StepSizeSchedule,
    TraceRecord,
    WeightRule,
    apply_preset,
    constant_step_bound,
    lyapunov_diagnostics,
    run,
    sonata_iteration,
)
from .baselines import (
    BaselineConfig,
    BaselineKind,
    gradient_projection_step,
    run_baseline,
    subgradient_push_step,
)
from .consensus import (
    ConsensusState,
    NetworkConstants,
    consensus_error,
    effective_row_stochastic,
    initial_state,
    network_constants,
    push_sum_step,
    track_average,
    weighted_average,
)
from .graphs import (
    DigraphSnapshot,
    GraphModel,
    GraphSequence,
    WeightKind,
    WeightMatrix,
    build_metropolis_weights,
    build_push_sum_weights,
    check_b_strong_connectivity,
    generate_snapshot,
    load_custom_sequence,
    make_snapshot,
)
from .metrics import MeritReport, best_response_oracle, compute_merits, merit_D, merit_J, nmse
from .problems import (
    ConstraintSet,
    IngestionError,
    ProblemInstance,
    RegKind,
    Regularizer,
    SmoothLocalCost,
    load_matrix_csv,
    make_distributed_pca,
    make_sparse_regression,
    project,
    reg_dc_parts,
    reg_value,
)
from .surrogates import (
    SubproblemError,
    SurrogateKind,
    SurrogateSpec,
    inner_proximal_solver,
    soft_threshold,
    solve_subproblem,
    subproblem_objective,
)

__all__ = [name for name in dir() if not name.startswith("_")]
