"""Rollout execution and candidate generation.

A rollout renders the scene, conditions the policy on the depth feature
and target position, turns the decoded anchors into a smooth path pinned
at the gripper, retimes it to constant speed and pushes through the
simulator. Candidates are prior-latent decodings of the same scene,
scored by simulating each one and comparing against doing nothing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from ..grp import AnchorSet, build_posterior
from ..rewards import RewardBreakdown, total_reward
from ..sim import Scene, Trajectory, render_depth, retime_constant_speed, run_trajectory
from ..seeding import mix_seed
from .cvae import PolicyError, TrajectoryPolicy
from .features import PolicyState, encode_state, normalize_depth

BUFFER_TRAJECTORY_STRIDE = 50


@dataclass
class RolloutResult:
    state: PolicyState
    z: np.ndarray
    anchors: np.ndarray          # (3, 2) executed free anchors
    trajectory: Trajectory
    reward: RewardBreakdown
    scene_before: Scene
    scene_after: Scene
    seed: int
    depth: np.ndarray | None = None   # (1, 38, 64) normalized, for fine-tuning


class ReplayBuffer:
    """Bounded FIFO of rollout results; evicts strictly oldest-first.

    Stored trajectories are decimated; rewards stay recomputable from the
    stored scenes.
    """

    def __init__(self, capacity: int = 2000):
        if capacity < 1:
            raise PolicyError("buffer capacity must be positive")
        self.capacity = capacity
        self._items: deque[RolloutResult] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def append(self, result: RolloutResult) -> None:
        slim = replace(result,
                       trajectory=result.trajectory.decimate(BUFFER_TRAJECTORY_STRIDE))
        self._items.append(slim)

    def extend(self, results) -> None:
        for r in results:
            self.append(r)

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> dict:
        if len(self._items) < batch_size:
            raise PolicyError(
                f"buffer holds {len(self._items)} rollouts, need {batch_size}")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        items = [self._items[int(i)] for i in idx]
        return {
            "anchors": np.stack([r.anchors.reshape(-1) for r in items]).astype(np.float32),
            "states": np.stack([r.state.vector() for r in items]).astype(np.float32),
            "rewards": np.array([r.reward.total for r in items], dtype=np.float64),
            "depths": (np.stack([r.depth for r in items])
                       if items[0].depth is not None else None),
        }

    def recent(self, n: int) -> list[RolloutResult]:
        items = list(self._items)
        return items[-n:]


def anchors_to_path(policy: TrajectoryPolicy, start: tuple[float, float],
                    free_anchors: np.ndarray) -> np.ndarray:
    """Smooth path through the anchors, pinned exactly at the start."""
    anchor_set = AnchorSet.from_free_anchors(start, free_anchors)
    posterior = build_posterior(anchor_set, policy.config.kernel(),
                                policy.config.query_points)
    path = posterior.mean.copy()
    path[0] = start
    return path


def rollout(scene: Scene, z: np.ndarray, policy: TrajectoryPolicy,
            seed: int, explore: bool = True,
            keep_depth: bool = True) -> RolloutResult:
    """Execute one policy trajectory on a copy of the scene."""
    depth_img = render_depth(scene)
    target = scene.target()
    state = encode_state(depth_img, target.center, policy.encoder)

    rng = np.random.default_rng(seed) if explore else None
    anchors = policy.sample_anchor_sets(z, state, rng=rng)

    start = scene.gripper.position
    path = anchors_to_path(policy, start, anchors)
    traj = retime_constant_speed(path, speed=policy.config.speed,
                                 rate=policy.config.rate)
    after, _ = run_trajectory(scene, traj)
    reward = total_reward(scene, after, start=start, target_id=target.id)
    return RolloutResult(
        state=state, z=np.asarray(z, dtype=np.float32), anchors=anchors,
        trajectory=traj, reward=reward, scene_before=scene.copy(),
        scene_after=after, seed=seed,
        depth=normalize_depth(depth_img) if keep_depth else None)


@dataclass
class Candidate:
    id: int
    z: np.ndarray
    anchors: np.ndarray
    path: np.ndarray             # (T, 2) smooth path on the shared time grid
    trajectory: Trajectory
    predicted_score: float       # simulated total-reward gain over a no-op
    predicted_reward: RewardBreakdown

    def to_dict(self, stride: int = BUFFER_TRAJECTORY_STRIDE) -> dict:
        return {
            "id": self.id,
            "score": self.predicted_score,
            "duration": self.trajectory.duration,
            "polyline": [[float(x), float(y)] for x, y in self.path],
            "predicted_reward": self.predicted_reward.to_dict(),
        }


def sample_candidates(scene: Scene, k: int, policy: TrajectoryPolicy,
                      seed: int) -> list[Candidate]:
    """K mean-decoded prior draws, scored by internal simulation.

    Ids follow draw order and stay attached through the score sort, so a
    returned candidate is identifiable regardless of rank.
    """
    if k < 1:
        raise PolicyError("need at least one candidate")
    depth_img = render_depth(scene)
    target = scene.target()
    state = encode_state(depth_img, target.center, policy.encoder)
    start = scene.gripper.position

    baseline = total_reward(scene, scene, start=start, target_id=target.id).total

    rng = np.random.default_rng(mix_seed("candidates", seed))
    zs = rng.standard_normal((k, policy.config.latent_dim))

    candidates = []
    for idx in range(k):
        anchors = policy.sample_anchor_sets(zs[idx], state, rng=None)
        path = anchors_to_path(policy, start, anchors)
        traj = retime_constant_speed(path, speed=policy.config.speed,
                                     rate=policy.config.rate)
        after, _ = run_trajectory(scene, traj)
        predicted = total_reward(scene, after, start=start, target_id=target.id)
        candidates.append(Candidate(
            id=idx, z=zs[idx].astype(np.float32), anchors=anchors, path=path,
            trajectory=traj, predicted_score=predicted.total - baseline,
            predicted_reward=predicted))

    candidates.sort(key=lambda c: (-c.predicted_score, c.id))
    return candidates


def pairwise_max_deviation(path_a: np.ndarray, path_b: np.ndarray) -> float:
    """Largest pointwise gap between two paths on the shared time grid."""
    diff = path_a - path_b
    return float(np.hypot(diff[:, 0], diff[:, 1]).max())
