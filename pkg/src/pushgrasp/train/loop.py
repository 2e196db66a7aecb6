"""Training coordinator: parallel rollout collection, reward-weighted
policy updates, metrics streaming and periodic checkpoints."""

from __future__ import annotations

import json
import multiprocessing
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from ..nn import AdamState
from ..policy import (
    PolicyConfig,
    ReplayBuffer,
    TrajectoryPolicy,
    load_cae,
    train_iteration,
)
from ..rewards import SAFETY_PENALTY
from ..seeding import mix_seed
from ..sim import RandomizationSpec, TableSpec
from .workers import run_slots

MOVING_AVG_WINDOW = 50


class TrainError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    iterations: int = 200
    rollouts_per_iteration: int = 32
    workers: int = 8
    seed: int = 1
    checkpoint_every: int = 50
    out_dir: str = "runs/default"
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    scene: RandomizationSpec = field(default_factory=RandomizationSpec)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["policy"] = self.policy.to_dict()
        data["scene"] = self.scene.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        policy = PolicyConfig.from_dict(data.pop("policy", {}))
        scene = RandomizationSpec.from_dict(data.pop("scene", {}))
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(policy=policy, scene=scene, **known)


@dataclass
class TrainResult:
    checkpoint_path: str
    metrics_path: str
    summary: dict


def _moving_average(values: list[float], window: int) -> float:
    tail = values[-window:]
    return float(np.mean(tail)) if tail else float("nan")


def _collect_rollouts(policy, config: TrainConfig, iteration: int, pool):
    slots = list(range(config.rollouts_per_iteration))
    if pool is None:
        return run_slots((policy, config.scene, config.seed, iteration, slots))
    shares = [slots[w::config.workers] for w in range(config.workers)]
    shares = [s for s in shares if s]
    tasks = [(policy, config.scene, config.seed, iteration, share)
             for share in shares]
    chunks = pool.map(run_slots, tasks)
    by_slot = {}
    for share, chunk in zip(shares, chunks):
        for slot, result in zip(share, chunk):
            by_slot[slot] = result
    return [by_slot[s] for s in slots]


def train(config: TrainConfig, cae_path: str,
          resume_path: str | None = None,
          log=lambda msg: None) -> TrainResult:
    """Run the full training loop and return checkpoint/metrics locations."""
    os.makedirs(config.out_dir, exist_ok=True)
    if not os.path.exists(cae_path):
        raise TrainError(f"autoencoder checkpoint not found: {cae_path}")
    encoder, _, _ = load_cae(cae_path)

    start_iteration = 0
    if resume_path:
        # The encoder and the policy's own config travel in the checkpoint.
        policy, adam, extras = TrajectoryPolicy.load(resume_path)
        if adam is None:
            raise TrainError("resume checkpoint lacks optimizer state")
        start_iteration = int(extras.get("iteration", 0))
        config.policy = policy.config
    else:
        policy = TrajectoryPolicy(config.policy, encoder, TableSpec(),
                                  seed=mix_seed(config.seed, "policy-init"))
        adam = AdamState.for_params(policy.trainable_params(),
                                    lr=config.policy.learning_rate)

    manifest = {"config": config.to_dict(), "cae_path": cae_path,
                "resume": resume_path, "start_iteration": start_iteration}
    with open(os.path.join(config.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    buffer = ReplayBuffer(capacity=config.policy.buffer_capacity)
    metrics_path = os.path.join(config.out_dir, "metrics.jsonl")
    mode = "a" if resume_path else "w"

    pool = None
    if config.workers > 1:
        context = multiprocessing.get_context("fork")
        pool = context.Pool(config.workers)

    reward_history: list[float] = []
    fall_history: list[bool] = []
    try:
        with open(metrics_path, mode, encoding="utf-8") as metrics_file:
            for iteration in range(start_iteration,
                                   start_iteration + config.iterations):
                results = _collect_rollouts(policy, config, iteration, pool)
                buffer.extend(results)
                for r in results:
                    reward_history.append(r.reward.total)
                    fall_history.append(r.reward.safety == SAFETY_PENALTY)

                stats = None
                if len(buffer) >= config.policy.batch_size:
                    rng = np.random.default_rng(
                        mix_seed(config.seed, "train", iteration))
                    batch = buffer.sample_batch(config.policy.batch_size, rng)
                    stats = train_iteration(batch, policy, adam, rng)
                    if stats.aborted:
                        log(f"iteration {iteration}: non-finite loss, "
                            "update skipped")

                line = {
                    "iteration": iteration,
                    "episodes": len(reward_history),
                    "reward_mean": float(np.mean(
                        [r.reward.total for r in results])),
                    "reward_max": float(np.max(
                        [r.reward.total for r in results])),
                    "moving_avg": _moving_average(reward_history,
                                                  MOVING_AVG_WINDOW),
                    "fall_rate": _moving_average(
                        [float(f) for f in fall_history], MOVING_AVG_WINDOW),
                    "loss": None if stats is None else stats.loss,
                    "kl": None if stats is None else stats.kl,
                    "grad_norm": None if stats is None else stats.grad_norm,
                    "buffer": len(buffer),
                }
                metrics_file.write(json.dumps(line) + "\n")
                metrics_file.flush()
                log(f"iter {iteration:4d}  avg50 {line['moving_avg']:8.2f}  "
                    f"fall50 {line['fall_rate']:.2f}  "
                    f"loss {line['loss'] if line['loss'] is not None else float('nan'):.3f}")

                if (config.checkpoint_every
                        and (iteration + 1) % config.checkpoint_every == 0):
                    policy.save(os.path.join(config.out_dir,
                                             f"policy_iter{iteration + 1}.ckpt"),
                                adam=adam, extras={"iteration": iteration + 1})
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    final_path = os.path.join(config.out_dir, "policy_final.ckpt")
    total_iters = start_iteration + config.iterations
    policy.save(final_path, adam=adam, extras={"iteration": total_iters})

    first50 = float(np.mean(reward_history[:MOVING_AVG_WINDOW]))
    summary = {
        "episodes": len(reward_history),
        "iterations": total_iters,
        "first50_avg": first50,
        "final_moving_avg": _moving_average(reward_history, MOVING_AVG_WINDOW),
        "final_fall_rate": _moving_average([float(f) for f in fall_history],
                                           MOVING_AVG_WINDOW),
        "seed": config.seed,
    }
    with open(os.path.join(config.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return TrainResult(checkpoint_path=final_path, metrics_path=metrics_path,
                       summary=summary)
