"""Velocity-tracking stochastic optimal feedback control for saccades.

The package covers the full loop: a second-order oculomotor plant with
signal-dependent control noise, finite-horizon gain synthesis by backward
recursion, an internal forward model supplying state estimates without
sensory feedback, seeded Monte-Carlo simulation, a behavioral data
pipeline that turns recordings into desired velocity profiles, two-stage
parameter estimation, and sweep/main-sequence analyses.
"""

from ._kernels import USING_COMPILED, implementation_name
from .analysis import (
    ConditionResult,
    LineFit,
    MainSequencePoint,
    MainSequenceResult,
    PointSource,
    SweepReport,
    SweepSummary,
    amplitude_sweep,
    direction_sweep,
    main_sequence,
    main_sequence_points,
    summarize_sweeps,
)
from .controller import (
    CostSpec,
    GainSchedule,
    ValueFormReport,
    backward_pass,
    control_at,
    expected_cost,
    propagate_moments,
    terminal_weights,
    verify_value_form,
)
from .dynamics import (
    ContinuousSystem,
    DiscreteSystem,
    DiscretizationMethod,
    Geometry,
    NoiseModel,
    PlantConfig,
    build_continuous,
    discretize,
    noise_cost_contraction,
    step_stochastic,
)
from .errors import (
    AnalysisError,
    ConfigurationError,
    ContractError,
    DetectionError,
    FitWarning,
    IngestionError,
    MetricError,
    SaccadeError,
    SynthesisError,
    VerificationError,
)
from .estimator import ForwardModel
from .fitting import (
    FitResult,
    StageResult,
    fit_alpha,
    fit_q,
    predict_mean,
    relative_rms_error,
    two_stage_fit,
)
from .signals import (
    DesiredSignal,
    MeanProfile,
    RawRecording,
    SaccadeSegment,
    TrialRecording,
    Variability,
    analyze_condition,
    build_desired,
    detect_saccade,
    export_recording,
    extract_trace,
    generate_synthetic_subject,
    ingest_recording,
    minimum_jerk_displacement,
    minimum_jerk_velocity,
    normalize_average,
    reference_on_grid,
    smooth_differentiate,
    target_label,
)
from .simulation import (
    EnsembleStats,
    Trajectory,
    simulate_mean,
    simulate_monte_carlo,
    simulate_oblique,
    trial_noise_streams,
)
from .verification import (
    CheckResult,
    VerificationReport,
    check_decoupling,
    check_oracle_equivalence,
    check_riccati_reduction,
    check_value_form,
    oracle_controls,
    riccati_tracking_gains,
    run_all_checks,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "CheckResult",
    "ConditionResult",
    "ConfigurationError",
    "ContinuousSystem",
    "ContractError",
    "CostSpec",
    "DesiredSignal",
    "DetectionError",
    "DiscreteSystem",
    "DiscretizationMethod",
    "EnsembleStats",
    "FitResult",
    "FitWarning",
    "ForwardModel",
    "GainSchedule",
    "Geometry",
    "IngestionError",
    "LineFit",
    "MainSequencePoint",
    "MainSequenceResult",
    "MeanProfile",
    "MetricError",
    "NoiseModel",
    "PlantConfig",
    "PointSource",
    "RawRecording",
    "SaccadeError",
    "SaccadeSegment",
    "StageResult",
    "SweepReport",
    "SweepSummary",
    "SynthesisError",
    "Trajectory",
    "TrialRecording",
    "USING_COMPILED",
    "ValueFormReport",
    "Variability",
    "VerificationError",
    "VerificationReport",
    "amplitude_sweep",
    "analyze_condition",
    "backward_pass",
    "build_continuous",
    "build_desired",
    "check_decoupling",
    "check_oracle_equivalence",
    "check_riccati_reduction",
    "check_value_form",
    "control_at",
    "detect_saccade",
    "direction_sweep",
    "discretize",
    "expected_cost",
    "export_recording",
    "extract_trace",
    "fit_alpha",
    "fit_q",
    "generate_synthetic_subject",
    "implementation_name",
    "ingest_recording",
    "main_sequence",
    "main_sequence_points",
    "minimum_jerk_displacement",
    "minimum_jerk_velocity",
    "noise_cost_contraction",
    "normalize_average",
    "oracle_controls",
    "predict_mean",
    "propagate_moments",
    "reference_on_grid",
    "relative_rms_error",
    "riccati_tracking_gains",
    "run_all_checks",
    "simulate_mean",
    "simulate_monte_carlo",
    "simulate_oblique",
    "smooth_differentiate",
    "step_stochastic",
    "summarize_sweeps",
    "target_label",
    "terminal_weights",
    "trial_noise_streams",
    "two_stage_fit",
    "verify_value_form",
]
