from .layers import (
    Conv2D,
    ConvTranspose2D,
    Dense,
    Flatten,
    Layer,
    NNError,
    Reshape,
    Softplus,
    Tanh,
    glorot_uniform,
    layer_from_spec,
)
from .network import ForwardCache, Network, clip_global_norm
from .adam import AdamState, adam_step
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint

__all__ = [
    "Conv2D", "ConvTranspose2D", "Dense", "Flatten", "Layer", "NNError",
    "Reshape", "Softplus", "Tanh", "glorot_uniform", "layer_from_spec",
    "ForwardCache", "Network", "clip_global_norm",
    "AdamState", "adam_step",
    "CheckpointError", "load_checkpoint", "save_checkpoint",
]
