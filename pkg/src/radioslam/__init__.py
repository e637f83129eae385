"""Collaborative SE(2) SLAM from WiFi fingerprint similarity.

Per-robot odometry is fused with intra- and inter-robot loop-closure
constraints derived from fingerprint similarity via a binned
similarity-to-distance model, then optimized with sparse
Levenberg-Marquardt on a pose graph.
"""

from .config import PipelineConfig, build_config, config_from_dict, config_to_dict
from .constraints import (
    Distance,
    LoopClosureConfig,
    NodeId,
    OdomInfoParams,
    PosePrior,
    RelativePose,
    RobotData,
    build_problem,
    inter_robot_closures,
    intra_robot_closures,
    odometry_constraints,
)
from .distance_model import (
    SimilarityDistanceModel,
    collect_training_pairs,
    fit_binned_model,
    predict,
    predict_many,
)
from .errors import ConfigError, DataError, RadioSlamError
from .evaluation import (
    AccuracyReport,
    SweepCell,
    SweepResult,
    improvement_percent,
    mean_position_error,
    run_sweep,
)
from .fingerprint import Fingerprint, RawScan, group_scans, pair_decompose
from .pipeline import (
    IngestedRobot,
    SlamResult,
    ingest_dataset,
    load_dataset,
    run_slam,
    train_model,
)
from .pose_graph import LmOptions, OptimizeReport, PoseGraphProblem, optimize
from .se2 import Pose2, compose, compose_increments, relative, relative_increments
from .similarity import SimilarityParams, pairwise_similarity, similarity
from .simulator import SimulationConfig, World, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "ConfigError",
    "DataError",
    "Distance",
    "Fingerprint",
    "IngestedRobot",
    "LmOptions",
    "LoopClosureConfig",
    "NodeId",
    "OdomInfoParams",
    "OptimizeReport",
    "PipelineConfig",
    "Pose2",
    "PoseGraphProblem",
    "PosePrior",
    "RadioSlamError",
    "RawScan",
    "RelativePose",
    "RobotData",
    "SimilarityDistanceModel",
    "SimilarityParams",
    "SimulationConfig",
    "SlamResult",
    "SweepCell",
    "SweepResult",
    "World",
    "build_config",
    "build_problem",
    "collect_training_pairs",
    "compose",
    "compose_increments",
    "config_from_dict",
    "config_to_dict",
    "fit_binned_model",
    "generate_dataset",
    "group_scans",
    "improvement_percent",
    "ingest_dataset",
    "inter_robot_closures",
    "intra_robot_closures",
    "load_dataset",
    "mean_position_error",
    "odometry_constraints",
    "optimize",
    "pair_decompose",
    "pairwise_similarity",
    "predict",
    "predict_many",
    "relative",
    "relative_increments",
    "run_slam",
    "run_sweep",
    "similarity",
    "train_model",
]
