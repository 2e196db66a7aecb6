"""Conditional VAE over anchor sets.

The action is three free anchor points (six coordinates). A recognition
net q(z | x, s) embeds executed anchors into a latent code; the decoder
p(x | z, s) maps a code plus the scene state back to an anchor Gaussian.
Training minimizes a reward-weighted ELBO so high-reward rollouts dominate
the regression, and sampling z from its standard-normal prior at a fixed
scene yields multiple candidate trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from ..grp import KernelParams
from ..nn import (
    AdamState,
    Dense,
    NNError,
    Network,
    Tanh,
    adam_step,
    clip_global_norm,
    load_checkpoint,
    save_checkpoint,
)
from ..sim.scene import TableSpec
from .features import FEATURE_DIM, DepthEncoder, PolicyState

ANCHOR_COORDS = 6  # three free anchors in the plane


class PolicyError(ValueError):
    pass


@dataclass
class PolicyConfig:
    latent_dim: int = 4
    hidden_units: int = 64
    reward_temperature: float = 10.0   # eta in the softmax weighting
    kl_weight: float = 1e-2            # beta on the KL term
    learning_rate: float = 1e-3
    batch_size: int = 64
    grad_clip: float = 10.0
    sigma_floor: float = 1e-4
    init_sigma: float = 0.06
    buffer_capacity: int = 2000
    speed: float = 0.1
    rate: float = 500.0
    query_points: int = 64
    fine_tune_encoder: bool = False
    kernel_length_scale: float = 0.25
    kernel_signal_variance: float = 0.05
    kernel_noise_variance: float = 1e-8

    def kernel(self) -> KernelParams:
        return KernelParams(length_scale=self.kernel_length_scale,
                            signal_variance=self.kernel_signal_variance,
                            noise_variance=self.kernel_noise_variance)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def softmax_weights(rewards: np.ndarray, eta: float) -> np.ndarray:
    """Batch weights proportional to exp(reward / eta); they sum to 1."""
    scaled = np.asarray(rewards, dtype=np.float64) / eta
    scaled -= scaled.max()
    w = np.exp(scaled)
    return w / w.sum()


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class TrajectoryPolicy:
    """Anchor-set CVAE plus the frozen depth encoder it conditions on."""

    def __init__(self, config: PolicyConfig, encoder: DepthEncoder,
                 table: TableSpec | None = None, seed: int = 0,
                 networks: dict[str, Network] | None = None):
        self.config = config
        self.encoder = encoder
        self.table = table or TableSpec()
        cx = 0.5 * (self.table.x_range[0] + self.table.x_range[1])
        cy = 0.5 * (self.table.y_range[0] + self.table.y_range[1])
        self._center = np.array([cx, cy] * 3, dtype=np.float32)
        self._lo = np.array([self.table.x_range[0], self.table.y_range[0]] * 3,
                            dtype=np.float32)
        self._hi = np.array([self.table.x_range[1], self.table.y_range[1]] * 3,
                            dtype=np.float32)

        if networks is not None:
            self.nets = networks
        else:
            self.nets = self._init_networks(seed)
        if not config.fine_tune_encoder:
            self.encoder.net.freeze(True)

    def _init_networks(self, seed: int) -> dict[str, Network]:
        cfg = self.config
        rng = np.random.default_rng(seed)
        h = cfg.hidden_units
        state_dim = FEATURE_DIM + 2
        sigma_bias = math.log(math.expm1(cfg.init_sigma))

        def trunk(in_dim):
            return Network([Dense.init(rng, in_dim, h), Tanh(),
                            Dense.init(rng, h, h), Tanh()])

        def head(out_dim, bias=0.0, scale=0.01):
            layer = Dense.init(rng, h, out_dim, scale=scale)
            layer.b[...] = bias
            return Network([layer])

        return {
            "q_trunk": trunk(ANCHOR_COORDS + state_dim),
            "q_mu": head(cfg.latent_dim),
            "q_sigma": head(cfg.latent_dim, bias=sigma_bias),
            "dec_trunk": trunk(cfg.latent_dim + state_dim),
            "dec_mu": head(ANCHOR_COORDS),
            "dec_sigma": head(ANCHOR_COORDS, bias=sigma_bias),
        }

    # -- parameter plumbing -------------------------------------------------

    _NET_ORDER = ("q_trunk", "q_mu", "q_sigma", "dec_trunk", "dec_mu", "dec_sigma")

    def trainable_params(self) -> list[np.ndarray]:
        params = []
        for name in self._NET_ORDER:
            params.extend(self.nets[name].params())
        if self.config.fine_tune_encoder:
            params.extend(self.encoder.net.params())
        return params

    def mark_updated(self) -> None:
        for name in self._NET_ORDER:
            self.nets[name].mark_updated()
        if self.config.fine_tune_encoder:
            self.encoder.net.mark_updated()

    def version(self) -> int:
        return self.nets["dec_mu"].version

    def astype(self, dtype) -> "TrajectoryPolicy":
        nets = {name: net.astype(dtype) for name, net in self.nets.items()}
        clone = TrajectoryPolicy(self.config, self.encoder, self.table,
                                 networks=nets)
        return clone

    # -- decoding -----------------------------------------------------------

    def _state_matrix(self, states: list[PolicyState]) -> np.ndarray:
        return np.stack([s.vector() for s in states]).astype(np.float32)

    def decode_anchors(self, z: np.ndarray,
                       state: PolicyState) -> tuple[np.ndarray, np.ndarray]:
        """Mean and diagonal stddev of the three free anchors for one state.

        Means are clamped to the table bounds; stddev has a small floor.
        """
        z = np.asarray(z, dtype=np.float32).reshape(1, -1)
        if z.shape[1] != self.config.latent_dim:
            raise PolicyError(f"latent must have {self.config.latent_dim} dims")
        if not np.isfinite(z).all():
            raise PolicyError("latent vector must be finite")
        d_in = np.concatenate([z, self._state_matrix([state])], axis=1)
        h = self.nets["dec_trunk"].forward(d_in)
        raw_mu = self.nets["dec_mu"].forward(h)
        raw_sigma = self.nets["dec_sigma"].forward(h)
        mean = np.clip(self._center + raw_mu[0], self._lo, self._hi)
        sigma = _softplus(raw_sigma[0]) + self.config.sigma_floor
        return mean.astype(np.float64), sigma.astype(np.float64)

    def sample_anchor_sets(self, z: np.ndarray, state: PolicyState,
                           rng: np.random.Generator | None = None) -> np.ndarray:
        """One anchor set (3, 2); mean anchors when rng is None."""
        mean, sigma = self.decode_anchors(z, state)
        flat = mean if rng is None else mean + sigma * rng.standard_normal(ANCHOR_COORDS)
        flat = np.clip(flat, self._lo, self._hi)
        return flat.reshape(3, 2)

    # -- training loss ------------------------------------------------------

    def loss_and_grads(self, anchors: np.ndarray, states: np.ndarray,
                       rewards: np.ndarray, eps: np.ndarray,
                       depths: np.ndarray | None = None):
        """Reward-weighted CVAE loss with hand-chained gradients.

        anchors: (B, 6) executed anchor coordinates; states: (B, 12)
        feature+target rows; eps: (B, latent) fixed reparameterization
        draws. Returns (loss, grads aligned with trainable_params(), stats).
        """
        cfg = self.config
        dz = cfg.latent_dim
        w = softmax_weights(rewards, cfg.reward_temperature)

        enc_cache = None
        if cfg.fine_tune_encoder:
            if depths is None:
                raise PolicyError("fine-tuning requires stored depth images")
            feats, enc_cache = self.encoder.net.forward(depths, want_cache=True)
            states = np.concatenate([feats, states[:, FEATURE_DIM:]], axis=1)

        dtype = anchors.dtype
        w_col = w[:, None].astype(dtype)

        q_in = np.concatenate([anchors, states], axis=1)
        hq, qt_cache = self.nets["q_trunk"].forward(q_in, want_cache=True)
        mu_q, qm_cache = self.nets["q_mu"].forward(hq, want_cache=True)
        raw_sq, qs_cache = self.nets["q_sigma"].forward(hq, want_cache=True)
        sigma_q = _softplus(raw_sq) + cfg.sigma_floor
        z = mu_q + sigma_q * eps

        d_in = np.concatenate([z, states], axis=1)
        hd, dt_cache = self.nets["dec_trunk"].forward(d_in, want_cache=True)
        raw_mu, dm_cache = self.nets["dec_mu"].forward(hd, want_cache=True)
        raw_sd, ds_cache = self.nets["dec_sigma"].forward(hd, want_cache=True)

        mu_unclipped = self._center.astype(dtype) + raw_mu
        mu_x = np.clip(mu_unclipped, self._lo.astype(dtype), self._hi.astype(dtype))
        clip_pass = ((mu_unclipped > self._lo) & (mu_unclipped < self._hi)).astype(dtype)
        sigma_x = _softplus(raw_sd) + cfg.sigma_floor

        resid = (anchors - mu_x) / sigma_x
        recon = 0.5 * (resid ** 2) + np.log(sigma_x) + 0.5 * math.log(2 * math.pi)
        recon_per = recon.sum(axis=1)
        kl_per = 0.5 * ((mu_q ** 2) + (sigma_q ** 2) - 1.0
                        - 2.0 * np.log(sigma_q)).sum(axis=1)
        loss = float((w * (recon_per + cfg.kl_weight * kl_per)).sum())

        # Backward pass.
        dmu_x = w_col * (mu_x - anchors) / (sigma_x ** 2)
        dsigma_x = w_col * (1.0 / sigma_x - (anchors - mu_x) ** 2 / sigma_x ** 3)
        draw_mu = dmu_x * clip_pass
        draw_sd = dsigma_x * _sigmoid(raw_sd)

        dhd_mu, g_dm = self.nets["dec_mu"].backward(dm_cache, draw_mu)
        dhd_sd, g_ds = self.nets["dec_sigma"].backward(ds_cache, draw_sd)
        dd_in, g_dt = self.nets["dec_trunk"].backward(dt_cache, dhd_mu + dhd_sd)
        dzeta = dd_in[:, :dz]
        dstate_dec = dd_in[:, dz:]

        dmu_q = dzeta + w_col * cfg.kl_weight * mu_q
        dsigma_q = dzeta * eps + w_col * cfg.kl_weight * (sigma_q - 1.0 / sigma_q)
        draw_sq = dsigma_q * _sigmoid(raw_sq)

        dhq_mu, g_qm = self.nets["q_mu"].backward(qm_cache, dmu_q)
        dhq_sq, g_qs = self.nets["q_sigma"].backward(qs_cache, draw_sq)
        dq_in, g_qt = self.nets["q_trunk"].backward(qt_cache, dhq_mu + dhq_sq)

        grads = g_qt + g_qm + g_qs + g_dt + g_dm + g_ds
        if cfg.fine_tune_encoder:
            dfeat = (dq_in[:, ANCHOR_COORDS:ANCHOR_COORDS + FEATURE_DIM]
                     + dstate_dec[:, :FEATURE_DIM])
            _, g_enc = self.encoder.net.backward(enc_cache, dfeat)
            grads = grads + g_enc

        stats = {
            "loss": loss,
            "recon": float((w * recon_per).sum()),
            "kl": float((w * kl_per).sum()),
            "batch_reward_mean": float(np.mean(rewards)),
            "batch_reward_max": float(np.max(rewards)),
        }
        return loss, grads, stats

    # -- persistence ---------------------------------------------------------

    def save(self, path: str, adam: AdamState | None = None,
             extras: dict | None = None) -> None:
        nets = dict(self.nets)
        nets["cae_encoder"] = self.encoder.net
        meta = {"kind": "policy", "config": self.config.to_dict(),
                "table": {"x_range": list(self.table.x_range),
                          "y_range": list(self.table.y_range),
                          "camera_height": self.table.camera_height}}
        if extras:
            meta.update(extras)
        save_checkpoint(path, nets, adam=adam, extras=meta)

    @classmethod
    def load(cls, path: str) -> tuple["TrajectoryPolicy", AdamState | None, dict]:
        nets, adam, extras = load_checkpoint(path)
        if extras.get("kind") != "policy":
            raise PolicyError(f"{path} is not a policy checkpoint")
        config = PolicyConfig.from_dict(extras["config"])
        table_info = extras["table"]
        table = TableSpec(x_range=tuple(table_info["x_range"]),
                          y_range=tuple(table_info["y_range"]),
                          camera_height=table_info["camera_height"])
        encoder = DepthEncoder(nets.pop("cae_encoder"),
                               camera_height=table.camera_height, trained=True)
        policy = cls(config, encoder, table, networks=nets)
        return policy, adam, extras


@dataclass
class TrainStats:
    loss: float
    recon: float
    kl: float
    batch_reward_mean: float
    batch_reward_max: float
    grad_norm: float
    aborted: bool = False


def train_iteration(batch: dict, policy: TrajectoryPolicy, adam: AdamState,
                    rng: np.random.Generator) -> TrainStats:
    """One weighted-ELBO Adam step over a sampled batch.

    batch carries anchors (B, 6), states (B, 12), rewards (B,) and
    optionally depths. A non-finite loss aborts with parameters untouched.
    """
    cfg = policy.config
    eps = rng.standard_normal((len(batch["rewards"]), cfg.latent_dim)).astype(np.float32)
    try:
        loss, grads, stats = policy.loss_and_grads(
            batch["anchors"], batch["states"], batch["rewards"], eps,
            depths=batch.get("depths"))
        if not math.isfinite(loss):
            raise NNError("non-finite loss")
    except NNError:
        return TrainStats(loss=float("nan"), recon=float("nan"), kl=float("nan"),
                          batch_reward_mean=float(np.mean(batch["rewards"])),
                          batch_reward_max=float(np.max(batch["rewards"])),
                          grad_norm=float("nan"), aborted=True)
    norm = clip_global_norm(grads, cfg.grad_clip)
    adam_step(policy.trainable_params(), grads, adam)
    policy.mark_updated()
    return TrainStats(grad_norm=norm, **stats)
