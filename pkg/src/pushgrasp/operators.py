"""Scripted operators that drive the teleop service over its HTTP API.

The assisted operator mirrors the intended loop: try to grasp, otherwise
request candidate sweeps, execute the top-scored one, repeat. The manual
operator is a keyboard baseline: it shepherds one blocker at a time out
of the approach corridor with axis-aligned 1 cm steps. Both report the
session's simulated time at the moment the grasp succeeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .sim import scene_from_dict


@dataclass
class OperatorOutcome:
    grasped: bool
    sim_time: float
    rearrange_count: int = 0
    manual_steps: int = 0


class OperatorError(RuntimeError):
    pass


def _post(client, url, payload=None):
    response = client.post(url, json=payload if payload is not None else {})
    if response.status_code >= 400:
        raise OperatorError(f"POST {url} -> {response.status_code}: {response.text}")
    return response.json()


def _get_scene(client, session_id):
    response = client.get(f"/sessions/{session_id}")
    response.raise_for_status()
    snapshot = response.json()
    return scene_from_dict(snapshot["scene"]), snapshot


def run_assisted_operator(client, session_id: str, k: int = 4,
                          max_rounds: int = 12) -> OperatorOutcome:
    """Greedy assisted loop: grasp when possible, else run the best sweep."""
    rearranges = 0
    for _ in range(max_rounds):
        result = _post(client, f"/sessions/{session_id}/grasp")
        if result["grasped"]:
            return OperatorOutcome(grasped=True,
                                   sim_time=result["session"]["elapsed_sim_time"],
                                   rearrange_count=rearranges)
        listing = _post(client, f"/sessions/{session_id}/candidates", {"k": k})
        top_id = listing["candidates"][0]["id"]
        _post(client, f"/sessions/{session_id}/execute", {"candidate_id": top_id})
        rearranges += 1
    _, snapshot = _get_scene(client, session_id)
    return OperatorOutcome(grasped=False,
                           sim_time=snapshot["elapsed_sim_time"],
                           rearrange_count=rearranges)


def _segment_side(a, b, p) -> float:
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])


def _dominant_axis_direction(vx: float, vy: float) -> str:
    if abs(vx) >= abs(vy):
        return "right" if vx >= 0 else "left"
    return "forward" if vy >= 0 else "backward"


_DIRECTION_VECTORS = {"right": (1.0, 0.0), "left": (-1.0, 0.0),
                      "forward": (0.0, 1.0), "backward": (0.0, -1.0)}


class ManualOperator:
    """Push-each-blocker keyboard heuristic with full scene knowledge."""

    def __init__(self, client, session_id: str, step_len: float = 0.01,
                 max_steps: int = 3000):
        self.client = client
        self.session_id = session_id
        self.step_len = step_len
        self.max_steps = max_steps
        self.steps_taken = 0

    def _step(self, direction: str) -> None:
        if self.steps_taken >= self.max_steps:
            raise OperatorError("manual step budget exhausted")
        _post(self.client, f"/sessions/{self.session_id}/manual",
              {"direction": direction})
        self.steps_taken += 1

    def _scene(self):
        scene, _ = _get_scene(self.client, self.session_id)
        return scene

    def _navigate(self, goal, clearance: float = 0.005,
                  budget: int = 400) -> None:
        """Axis-aligned walk to the goal, detouring around standing objects."""
        for _ in range(budget):
            scene = self._scene()
            gx, gy = scene.gripper.position
            dx, dy = goal[0] - gx, goal[1] - gy
            if math.hypot(dx, dy) <= self.step_len * 0.75:
                return
            primary = _dominant_axis_direction(dx, dy)
            if primary in ("left", "right"):
                secondary = "forward" if dy >= 0 else "backward"
            else:
                secondary = "right" if dx >= 0 else "left"
            for direction in (primary, secondary):
                ux, uy = _DIRECTION_VECTORS[direction]
                nx, ny = gx + ux * self.step_len, gy + uy * self.step_len
                blocked = any(
                    o.standing and math.hypot(o.center[0] - nx, o.center[1] - ny)
                    < scene.gripper.radius + o.radius + clearance
                    for o in scene.objects)
                if not blocked:
                    self._step(direction)
                    break
            else:
                # Boxed in; push through along the primary axis.
                self._step(primary)
        return

    def _push_blocker(self, blocker_id: int, push_budget: int = 80) -> str:
        """Returns 'grasped', 'cleared' or 'stuck'."""
        scene = self._scene()
        blocker = scene.get(blocker_id)
        target = scene.target()
        start = scene.gripper.position

        side = _segment_side(start, target.center, blocker.center)
        seg = (target.center[0] - start[0], target.center[1] - start[1])
        norm = math.hypot(*seg) or 1.0
        perp = (-seg[1] / norm, seg[0] / norm)
        if side < 0:
            perp = (-perp[0], -perp[1])
        push_dir = _dominant_axis_direction(*perp)
        ux, uy = _DIRECTION_VECTORS[push_dir]

        reach = scene.gripper.radius + blocker.radius + 0.012
        staging = (blocker.center[0] - ux * reach, blocker.center[1] - uy * reach)
        self._navigate(staging)

        for _ in range(push_budget):
            scene = self._scene()
            if not scene.get(blocker_id).standing:
                return "cleared"
            result = _post(self.client, f"/sessions/{self.session_id}/grasp")
            if result["grasped"]:
                self._last_grasp = result
                return "grasped"
            if blocker_id not in result["blockers"]:
                return "cleared"
            self._step(push_dir)
        return "stuck"

    def run(self, max_rounds: int = 24) -> OperatorOutcome:
        self._last_grasp = None
        for _ in range(max_rounds):
            result = _post(self.client, f"/sessions/{self.session_id}/grasp")
            if result["grasped"]:
                return OperatorOutcome(
                    grasped=True,
                    sim_time=result["session"]["elapsed_sim_time"],
                    manual_steps=self.steps_taken)
            blocker_id = result["blockers"][0]
            try:
                status = self._push_blocker(blocker_id)
            except OperatorError:
                break
            if status == "grasped":
                return OperatorOutcome(
                    grasped=True,
                    sim_time=self._last_grasp["session"]["elapsed_sim_time"],
                    manual_steps=self.steps_taken)
        _, snapshot = _get_scene(self.client, self.session_id)
        return OperatorOutcome(grasped=False,
                               sim_time=snapshot["elapsed_sim_time"],
                               manual_steps=self.steps_taken)


def run_manual_operator(client, session_id: str,
                        max_steps: int = 3000) -> OperatorOutcome:
    return ManualOperator(client, session_id, max_steps=max_steps).run()
