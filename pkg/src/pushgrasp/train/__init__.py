from .loop import MOVING_AVG_WINDOW, TrainConfig, TrainError, TrainResult, train
from .evaluate import (
    DIVERSITY_THRESHOLD,
    SceneEval,
    diversity_pairs,
    evaluate_policy,
    evaluate_scene,
    margin_sum,
    write_report,
)
from .workers import rollout_slot, run_slots

__all__ = [
    "MOVING_AVG_WINDOW", "TrainConfig", "TrainError", "TrainResult", "train",
    "DIVERSITY_THRESHOLD", "SceneEval", "diversity_pairs", "evaluate_policy",
    "evaluate_scene", "margin_sum", "write_report",
    "rollout_slot", "run_slots",
]
