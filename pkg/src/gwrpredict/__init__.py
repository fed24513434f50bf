"""Incremental learning and multi-step prediction of motion sequences.

The core is a growing vector-quantization network that inserts neurons
where its prototypes match poorly, plus a predictive variant whose neurons
pair a recent-history regressor with the future values it forecasts.
Stacked through sliding-window encoders they form a three-level hierarchy
that learns joint-angle sequences online and predicts several frames
ahead; the prediction buffer then lets a sender compensate transmission
delays by emitting the command that will be correct when it arrives.
"""

from .data import (
    DEFAULT_PATTERNS,
    FRAME_DIM,
    JOINT_LIMITS,
    JOINT_NAMES,
    PATTERNS,
    SIDES,
    MotionSequence,
    SkeletonFrame,
    SubjectStyle,
    angles_from_skeleton,
    corrupt_dropout,
    generate_synthetic,
    load_sequence,
    median_downsample,
    save_sequence,
    subject_style,
)
from .delay import (
    DelayModel,
    LagReport,
    PredictionBuffer,
    run_pipeline,
    select_command,
    write_lag_report,
)
from .experiments import (
    DatasetConfig,
    DelayRunConfig,
    ExperimentConfig,
    PatternData,
    SweepConfig,
    TrainingConfig,
    build_dataset,
    evaluate_demo,
    evaluate_suite,
    load_config,
    load_dataset_dir,
    parse_config,
    run_delay_demo,
    run_incremental,
    sweep_activation_threshold,
    sweep_data_loss,
    sweep_horizon,
    write_dataset_dir,
)
from .gwr import (
    EpochReport,
    GwrNetwork,
    GwrParams,
    StepReport,
    activation,
    habituation_step,
    load_network,
    save_network,
)
from .predictive import (
    PredictiveGwrNetwork,
    RegressorSample,
    load_predictive_network,
    save_predictive_network,
    split_window,
)
from .temporal import (
    EncodedSegment,
    EncodedSequence,
    EpochStats,
    Hierarchy,
    HierarchyConfig,
    TrainingReport,
    WindowEncoder,
    load_hierarchy,
    save_hierarchy,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # quantization core
    "GwrParams",
    "GwrNetwork",
    "StepReport",
    "EpochReport",
    "activation",
    "habituation_step",
    "save_network",
    "load_network",
    # predictive variant
    "RegressorSample",
    "split_window",
    "PredictiveGwrNetwork",
    "save_predictive_network",
    "load_predictive_network",
    # temporal hierarchy
    "WindowEncoder",
    "HierarchyConfig",
    "Hierarchy",
    "EpochStats",
    "TrainingReport",
    "EncodedSegment",
    "EncodedSequence",
    "save_hierarchy",
    "load_hierarchy",
    # data handling
    "FRAME_DIM",
    "JOINT_NAMES",
    "JOINT_LIMITS",
    "PATTERNS",
    "SIDES",
    "DEFAULT_PATTERNS",
    "MotionSequence",
    "SkeletonFrame",
    "SubjectStyle",
    "subject_style",
    "median_downsample",
    "angles_from_skeleton",
    "generate_synthetic",
    "corrupt_dropout",
    "save_sequence",
    "load_sequence",
    # delay compensation
    "DelayModel",
    "PredictionBuffer",
    "select_command",
    "LagReport",
    "run_pipeline",
    "write_lag_report",
    # experiment harness
    "DatasetConfig",
    "TrainingConfig",
    "SweepConfig",
    "DelayRunConfig",
    "ExperimentConfig",
    "PatternData",
    "parse_config",
    "load_config",
    "build_dataset",
    "write_dataset_dir",
    "load_dataset_dir",
    "evaluate_demo",
    "evaluate_suite",
    "run_incremental",
    "sweep_activation_threshold",
    "sweep_horizon",
    "sweep_data_loss",
    "run_delay_demo",
]
