"""Reward functions for the rearranging task.

The margin reward scores each obstacle by its clearance from the straight
approach segment between the push start and the target center; the safety
reward is a flat penalty whenever any object falls during the push. Both
are summed into the episode total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class RewardError(ValueError):
    pass


SAFETY_PENALTY = -30.0
SAFETY_BONUS = 10.0


@dataclass
class RewardBreakdown:
    margin_terms: list[tuple[int, float, float]] = field(default_factory=list)
    # (object id, clearance d in meters, margin reward)
    safety: float = 0.0
    total: float = 0.0
    newly_fallen: list[int] = field(default_factory=list)
    target_displacement: float = 0.0

    @property
    def margin_total(self) -> float:
        return math.fsum(term for _, _, term in self.margin_terms)

    def to_dict(self) -> dict:
        return {
            "margin_terms": [[oid, d, r] for oid, d, r in self.margin_terms],
            "safety": self.safety,
            "total": self.total,
            "newly_fallen": self.newly_fallen,
            "target_displacement": self.target_displacement,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RewardBreakdown":
        return cls(
            margin_terms=[(int(o), float(d), float(r))
                          for o, d, r in data["margin_terms"]],
            safety=float(data["safety"]),
            total=float(data["total"]),
            newly_fallen=list(data.get("newly_fallen", [])),
            target_displacement=float(data.get("target_displacement", 0.0)),
        )


def segment_point_distance(a: tuple[float, float], b: tuple[float, float],
                           p: tuple[float, float]) -> float:
    """Euclidean distance from p to the closed segment ab."""
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def margin_reward(d: float) -> float:
    """Piecewise clearance score; first matching branch wins."""
    if d <= 0.1:
        return 100.0 * d - 30.0
    if d <= 0.2:
        return 100.0 * d - 25.0
    if d <= 0.25:
        return 100.0 * d - 22.5
    return 15.0


def newly_fallen_ids(scene_before, scene_after) -> list[int]:
    before = {o.id: o.standing for o in scene_before.objects}
    after = {o.id: o.standing for o in scene_after.objects}
    if set(before) != set(after):
        raise RewardError("scenes do not share object ids")
    return [oid for oid in after if before[oid] and not after[oid]]


def safety_reward(scene_before, scene_after) -> float:
    """Flat penalty if at least one object fell, flat bonus otherwise."""
    return SAFETY_PENALTY if newly_fallen_ids(scene_before, scene_after) else SAFETY_BONUS


def margin_terms(scene, start: tuple[float, float],
                 target_id: int) -> list[tuple[int, float, float]]:
    """Clearance and margin reward per non-target object, fallen included."""
    target = scene.get(target_id)
    terms = []
    for obj in scene.objects:
        if obj.id == target_id:
            continue
        d = segment_point_distance(start, target.center, obj.center)
        terms.append((obj.id, d, margin_reward(d)))
    return terms


def total_reward(scene_before, scene_after, start: tuple[float, float],
                 target_id: int,
                 target_contact_penalty: float = 0.0) -> RewardBreakdown:
    """Margin terms on the post-push scene plus the safety term.

    Clearances use the original start and the target's current center.
    target_contact_penalty (default off) scales the recorded target
    displacement into an extra penalty for callers that want to discourage
    touching the target.
    """
    terms = margin_terms(scene_after, start, target_id)
    fallen = newly_fallen_ids(scene_before, scene_after)
    safety = SAFETY_PENALTY if fallen else SAFETY_BONUS

    t_before = scene_before.get(target_id).center
    t_after = scene_after.get(target_id).center
    displacement = math.hypot(t_after[0] - t_before[0], t_after[1] - t_before[1])

    total = math.fsum([r for _, _, r in terms] + [safety])
    if target_contact_penalty:
        total -= target_contact_penalty * displacement
    return RewardBreakdown(margin_terms=terms, safety=safety, total=total,
                           newly_fallen=fallen, target_displacement=displacement)


def grasp_feasible(scene, start: tuple[float, float], target_id: int,
                   corridor_halfwidth: float | None = None) -> tuple[bool, list[int]]:
    """True when no standing obstacle intrudes on the straight approach.

    An obstacle blocks unless its clearance from the segment strictly
    exceeds corridor_halfwidth plus its own radius. The halfwidth defaults
    to the gripper radius.
    """
    target = scene.get(target_id)
    if corridor_halfwidth is None:
        corridor_halfwidth = scene.gripper.radius
    blockers = []
    for obj in scene.objects:
        if obj.id == target_id or not obj.standing:
            continue
        d = segment_point_distance(start, target.center, obj.center)
        if not d > corridor_halfwidth + obj.radius:
            blockers.append(obj.id)
    return (len(blockers) == 0, blockers)
