"""Depth-image feature extraction: a small convolutional autoencoder is
pretrained on randomized scenes, then its encoder half embeds live depth
images into the 10-dimensional scene feature used by the policy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import (
    AdamState,
    Conv2D,
    ConvTranspose2D,
    Dense,
    Flatten,
    Network,
    Reshape,
    Tanh,
    adam_step,
    clip_global_norm,
    load_checkpoint,
    save_checkpoint,
)
from ..seeding import mix_seed
from ..sim import DepthImage, RandomizationSpec, randomize_scene, render_depth

FEATURE_DIM = 10
CONV_FEATURES = 16 * 10 * 16  # two stride-2 convs over 38x64


class FeatureError(ValueError):
    pass


@dataclass
class PolicyState:
    """Scene feature plus the target position; the policy's conditioning."""
    depth_feature: np.ndarray       # (10,) float32
    target: tuple[float, float]

    def __post_init__(self) -> None:
        self.depth_feature = np.asarray(self.depth_feature, dtype=np.float32)
        if self.depth_feature.shape != (FEATURE_DIM,):
            raise FeatureError(f"feature must have {FEATURE_DIM} entries")
        if not np.isfinite(self.depth_feature).all():
            raise FeatureError("non-finite depth feature")

    def vector(self) -> np.ndarray:
        return np.concatenate([self.depth_feature,
                               np.asarray(self.target, dtype=np.float32)])


def build_cae(seed: int) -> tuple[Network, Network]:
    rng = np.random.default_rng(seed)
    encoder = Network([
        Conv2D.init(rng, 1, 8),
        Tanh(),
        Conv2D.init(rng, 8, 16),
        Tanh(),
        Flatten(),
        Dense.init(rng, CONV_FEATURES, FEATURE_DIM),
    ])
    decoder = Network([
        Dense.init(rng, FEATURE_DIM, CONV_FEATURES),
        Tanh(),
        Reshape((16, 10, 16)),
        ConvTranspose2D.init(rng, 16, 8, output_padding=(0, 1)),
        Tanh(),
        ConvTranspose2D.init(rng, 8, 1, output_padding=(1, 1)),
    ])
    # Reconstructions start at the background level (empty-table depth).
    decoder.layers[-1].b[...] = 1.0
    return encoder, decoder


def normalize_depth(img: DepthImage) -> np.ndarray:
    """Depth scaled by camera height into (0, 1]; shape (1, rows, cols)."""
    return (img.values / img.camera_height).astype(np.float32)[None, :, :]


class DepthEncoder:
    """Frozen-by-default encoder mapping a depth image to the scene feature."""

    def __init__(self, net: Network, camera_height: float = 1.0,
                 trained: bool = False):
        self.net = net
        self.camera_height = camera_height
        self.trained = trained

    def encode(self, img: DepthImage) -> np.ndarray:
        return self.encode_batch(normalize_depth(img)[None])[0]

    def encode_batch(self, batch: np.ndarray) -> np.ndarray:
        if not self.trained:
            raise FeatureError("depth encoder has not been pretrained")
        return self.net.forward(batch.astype(np.float32))


def encode_state(img: DepthImage, target: tuple[float, float],
                 encoder: DepthEncoder) -> PolicyState:
    return PolicyState(depth_feature=encoder.encode(img),
                       target=(float(target[0]), float(target[1])))


@dataclass
class PretrainReport:
    num_images: int
    seed: int
    epochs: int
    batch_size: int
    final_loss: float
    loss_curve: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"num_images": self.num_images, "seed": self.seed,
                "epochs": self.epochs, "batch_size": self.batch_size,
                "final_loss": self.final_loss, "loss_curve": self.loss_curve}


def generate_depth_dataset(num_images: int, seed: int,
                           spec: RandomizationSpec | None = None) -> np.ndarray:
    """Normalized depth images of seeded random scenes; (N, 1, 38, 64)."""
    images = np.empty((num_images, 1, 38, 64), dtype=np.float32)
    for i in range(num_images):
        scene = randomize_scene(seed=mix_seed("cae-scene", seed, i), spec=spec)
        images[i] = normalize_depth(render_depth(scene))
    return images


def pretrain_cae(num_images: int = 10_000, seed: int = 0,
                 epochs: int = 8, batch_size: int = 64, lr: float = 1e-3,
                 spec: RandomizationSpec | None = None,
                 grad_clip: float = 10.0) -> tuple[DepthEncoder, Network, PretrainReport]:
    """Train the autoencoder on freshly randomized scenes.

    Returns the ready-to-use encoder, the decoder (for reconstruction
    checks) and a training report. Aborts on divergence.
    """
    encoder, decoder = build_cae(seed=mix_seed("cae-init", seed))
    images = generate_depth_dataset(num_images, seed, spec)
    rng = np.random.default_rng(mix_seed("cae-order", seed))

    params = encoder.params() + decoder.params()
    adam = AdamState.for_params(params, lr=lr)
    n_enc = len(encoder.params())

    losses = []
    loss = float("nan")
    for epoch in range(epochs):
        order = rng.permutation(num_images)
        epoch_loss = 0.0
        batches = 0
        for lo in range(0, num_images, batch_size):
            batch = images[order[lo:lo + batch_size]]
            code, enc_cache = encoder.forward(batch, want_cache=True)
            recon, dec_cache = decoder.forward(code, want_cache=True)
            err = recon - batch
            loss = float((err * err).mean())
            if not np.isfinite(loss):
                raise FeatureError(
                    f"autoencoder diverged at epoch {epoch} (loss={loss})")
            dout = (2.0 / err.size) * err
            dcode, dec_grads = decoder.backward(dec_cache, dout)
            _, enc_grads = encoder.backward(enc_cache, dcode)
            grads = enc_grads + dec_grads
            clip_global_norm(grads, grad_clip)
            adam_step(params, grads, adam)
            epoch_loss += loss
            batches += 1
        encoder.mark_updated()
        decoder.mark_updated()
        losses.append(epoch_loss / batches)

    report = PretrainReport(num_images=num_images, seed=seed, epochs=epochs,
                            batch_size=batch_size, final_loss=losses[-1],
                            loss_curve=losses)
    return DepthEncoder(encoder, trained=True), decoder, report


def save_cae(path: str, encoder: DepthEncoder, decoder: Network,
             report: PretrainReport) -> None:
    save_checkpoint(path, {"cae_encoder": encoder.net, "cae_decoder": decoder},
                    extras={"kind": "cae", "report": report.to_dict(),
                            "camera_height": encoder.camera_height})


def load_cae(path: str) -> tuple[DepthEncoder, Network, dict]:
    nets, _, extras = load_checkpoint(path)
    if extras.get("kind") != "cae":
        raise FeatureError(f"{path} is not an autoencoder checkpoint")
    encoder = DepthEncoder(nets["cae_encoder"],
                           camera_height=extras.get("camera_height", 1.0),
                           trained=True)
    return encoder, nets["cae_decoder"], extras.get("report", {})
