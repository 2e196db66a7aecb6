"""Held-out evaluation of a trained policy.

Each seeded scene gets K candidate sweeps; the top-scored one is executed
and judged by margin improvement, whether an initially blocked straight
grasp became clear, falls, and simulated time. Candidate spread is
summarized alongside.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from ..policy import TrajectoryPolicy, pairwise_max_deviation, sample_candidates
from ..rewards import grasp_feasible, margin_terms, total_reward
from ..seeding import mix_seed
from ..sim import RandomizationSpec, randomize_scene, run_trajectory

DIVERSITY_THRESHOLD = 0.03  # meters of maximum path separation


@dataclass
class SceneEval:
    scene_seed: int
    margin_before: float
    margin_after: float
    feasible_before: bool
    feasible_after: bool
    fell: bool
    sim_time: float
    diverse_pairs: int
    candidate_count: int

    @property
    def improved(self) -> bool:
        return self.margin_after > self.margin_before


def margin_sum(scene, start, target_id) -> float:
    return float(sum(r for _, _, r in margin_terms(scene, start, target_id)))


def diversity_pairs(candidates, threshold: float = DIVERSITY_THRESHOLD) -> int:
    """Number of candidate pairs whose paths separate beyond the threshold."""
    count = 0
    for a, b in itertools.combinations(candidates, 2):
        if pairwise_max_deviation(a.path, b.path) > threshold:
            count += 1
    return count


def evaluate_scene(policy: TrajectoryPolicy, scene_seed: int, k: int,
                   candidate_seed: int,
                   scene_spec: RandomizationSpec | None = None) -> SceneEval:
    scene = randomize_scene(seed=scene_seed, spec=scene_spec)
    target = scene.target()
    start = scene.gripper.position

    margin_before = margin_sum(scene, start, target.id)
    feasible_before, _ = grasp_feasible(scene, start, target.id)

    candidates = sample_candidates(scene, k, policy, seed=candidate_seed)
    top = candidates[0]
    after, _ = run_trajectory(scene, top.trajectory)
    outcome = total_reward(scene, after, start=start, target_id=target.id)

    margin_after = margin_sum(after, start, target.id)
    feasible_after, _ = grasp_feasible(after, start, target.id)

    return SceneEval(
        scene_seed=scene_seed,
        margin_before=margin_before,
        margin_after=margin_after,
        feasible_before=feasible_before,
        feasible_after=feasible_after,
        fell=bool(outcome.newly_fallen),
        sim_time=top.trajectory.duration,
        diverse_pairs=diversity_pairs(candidates),
        candidate_count=len(candidates),
    )


def evaluate_policy(policy: TrajectoryPolicy, num_scenes: int = 100,
                    k: int = 4, seed: int = 1000,
                    scene_spec: RandomizationSpec | None = None) -> dict:
    evals = []
    for i in range(num_scenes):
        evals.append(evaluate_scene(
            policy, scene_seed=mix_seed("eval-scene", seed, i), k=k,
            candidate_seed=mix_seed("eval-cand", seed, i),
            scene_spec=scene_spec))

    infeasible = [e for e in evals if not e.feasible_before]
    report = {
        "num_scenes": num_scenes,
        "k": k,
        "seed": seed,
        "improvement_fraction": float(np.mean([e.improved for e in evals])),
        "initially_infeasible": len(infeasible),
        "unblocked_fraction": (float(np.mean([e.feasible_after
                                              for e in infeasible]))
                               if infeasible else None),
        "fall_rate": float(np.mean([e.fell for e in evals])),
        "mean_sim_time": float(np.mean([e.sim_time for e in evals])),
        "mean_diverse_pairs": float(np.mean([e.diverse_pairs for e in evals])),
        "min_diverse_pairs": int(np.min([e.diverse_pairs for e in evals])),
        "scenes": [vars(e) | {"improved": e.improved} for e in evals],
    }
    return report


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
