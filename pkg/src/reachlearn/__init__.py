"""Model-based reaching with a recurrent adaptive forward model.

Structure-learning simulation: an LSTM forward model trained on random-walk
data under either pure rotations (``rot``) or rotations with shear and scale
(``rotplus``), coupled to a cross-entropy planner and tested on +/-60 degree
visuomotor rotations.
"""
from .arm import Action, ArmGeometry, ArmState, initial_state, step_arm, tip_position
from .config import ExperimentConfig, desk_config, load_config, save_config
from .experiment import (
    Corpus,
    TrialMetrics,
    compute_metrics,
    generate_corpus,
    normalize_trajectory,
    random_policy_baseline,
    run_experiment,
    run_test_block,
)
from .model import (
    ModelMemory,
    OracleArmModel,
    RecurrentForwardModel,
    eval_model_error,
    memory_reset,
    model_observe,
    simulate,
    train_model,
)
from .planner import CEMAgent, CemConfig, PlanDistribution, cem_plan, warm_start
from .task import EpisodeConfig, Observation, ReachEnv, TaskInstance, Trajectory
from .transforms import LinearTransform, TransformSpec, compose, sample_rot, sample_rotplus

__version__ = "0.1.0"

__all__ = [
    "Action", "ArmGeometry", "ArmState", "CEMAgent", "CemConfig", "Corpus", "EpisodeConfig",
    "ExperimentConfig", "LinearTransform", "ModelMemory", "Observation", "OracleArmModel",
    "PlanDistribution", "ReachEnv", "RecurrentForwardModel", "TaskInstance", "TransformSpec",
    "Trajectory", "TrialMetrics", "cem_plan", "compose", "compute_metrics", "desk_config",
    "eval_model_error", "generate_corpus", "initial_state", "load_config", "memory_reset",
    "model_observe", "normalize_trajectory", "random_policy_baseline", "run_experiment",
    "run_test_block", "sample_rot", "sample_rotplus", "save_config", "simulate", "step_arm",
    "tip_position", "train_model", "warm_start",
]
