from src.simulator.features import FEATURE_NAMES, N_FEATURES, moment_boxes, proposal_features
from src.simulator.scenes import Scene, generate_scene, generate_scenes, rotate_scene_quarter
from src.simulator.suite import run_benchmark_suite, run_gamma_sweep, sweep_specs, write_suite_outputs
from src.simulator.trainer import (
    ExperimentResult,
    SceneTask,
    TrainingResult,
    decode_references,
    evaluate_model,
    held_out_scenes,
    initial_predictor,
    predict_scene,
    run_experiment,
    train,
    training_scenes,
)

__all__ = [
    "FEATURE_NAMES",
    "N_FEATURES",
    "ExperimentResult",
    "Scene",
    "SceneTask",
    "TrainingResult",
    "decode_references",
    "evaluate_model",
    "generate_scene",
    "generate_scenes",
    "held_out_scenes",
    "initial_predictor",
    "moment_boxes",
    "predict_scene",
    "proposal_features",
    "rotate_scene_quarter",
    "run_benchmark_suite",
    "run_experiment",
    "run_gamma_sweep",
    "sweep_specs",
    "train",
    "training_scenes",
]
