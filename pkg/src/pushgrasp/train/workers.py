"""Rollout worker entry point for multiprocessing pools.

Rollout seeds attach to (iteration, slot) rather than to physical
workers, so changing the worker count reshuffles scheduling but never the
rollout stream itself.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..policy import TrajectoryPolicy, rollout
from ..policy.rollout import BUFFER_TRAJECTORY_STRIDE, RolloutResult
from ..seeding import mix_seed
from ..sim import RandomizationSpec, randomize_scene


def rollout_slot(policy: TrajectoryPolicy, scene_spec: RandomizationSpec,
                 run_seed: int, iteration: int, slot: int,
                 explore: bool = True) -> RolloutResult:
    """One seeded rollout on a freshly randomized scene."""
    scene_seed = mix_seed(run_seed, iteration, slot, "scene")
    scene = randomize_scene(seed=scene_seed, spec=scene_spec)
    z_rng = np.random.default_rng(mix_seed(run_seed, iteration, slot, "z"))
    z = z_rng.standard_normal(policy.config.latent_dim)
    result = rollout(scene, z, policy,
                     seed=mix_seed(run_seed, iteration, slot, "explore"),
                     explore=explore)
    # Ship the decimated trajectory back; the buffer stores it that way.
    return replace(result,
                   trajectory=result.trajectory.decimate(BUFFER_TRAJECTORY_STRIDE))


def run_slots(args) -> list[RolloutResult]:
    policy, scene_spec, run_seed, iteration, slots = args
    return [rollout_slot(policy, scene_spec, run_seed, iteration, slot)
            for slot in slots]
