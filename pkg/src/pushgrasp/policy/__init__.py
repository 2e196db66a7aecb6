from .features import (
    FEATURE_DIM,
    DepthEncoder,
    FeatureError,
    PolicyState,
    PretrainReport,
    build_cae,
    encode_state,
    generate_depth_dataset,
    load_cae,
    normalize_depth,
    pretrain_cae,
    save_cae,
)
from .cvae import (
    ANCHOR_COORDS,
    PolicyConfig,
    PolicyError,
    TrainStats,
    TrajectoryPolicy,
    softmax_weights,
    train_iteration,
)
from .rollout import (
    Candidate,
    ReplayBuffer,
    RolloutResult,
    anchors_to_path,
    pairwise_max_deviation,
    rollout,
    sample_candidates,
)

__all__ = [
    "FEATURE_DIM", "DepthEncoder", "FeatureError", "PolicyState",
    "PretrainReport", "build_cae", "encode_state", "generate_depth_dataset",
    "load_cae", "normalize_depth", "pretrain_cae", "save_cae",
    "ANCHOR_COORDS", "PolicyConfig", "PolicyError", "TrainStats",
    "TrajectoryPolicy", "softmax_weights", "train_iteration",
    "Candidate", "ReplayBuffer", "RolloutResult", "anchors_to_path",
    "pairwise_max_deviation", "rollout", "sample_candidates",
]
