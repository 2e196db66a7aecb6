"""Operator session engine.

A session wraps one scene and walks a small state machine: pick a target,
either grasp it directly or request candidate sweeps from the policy and
execute one, with a four-direction manual mode always available as the
baseline. Every motion goes through the same simulator physics and is
accounted in simulated seconds at the fixed end-effector speed.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..perception import dbscan, plan_grasp_approach, select_target
from ..policy import TrajectoryPolicy, sample_candidates
from ..policy.rollout import Candidate
from ..rewards import grasp_feasible, total_reward
from ..seeding import mix_seed
from ..sim import (
    Scene,
    randomize_scene,
    render_depth,
    render_pointcloud,
    retime_constant_speed,
    run_trajectory,
    scene_to_dict,
)

MANUAL_STEP_LEN = 0.01
MANUAL_DIRECTIONS = {
    "forward": (0.0, 1.0),
    "backward": (0.0, -1.0),
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
}
EVENT_DECIMATION = 50  # one stream event per 0.1 s of simulated motion
RECORD_STRIDE = 50


class SessionState(str, Enum):
    IDLE = "IDLE"
    TARGET_SELECTED = "TARGET_SELECTED"
    CANDIDATES_READY = "CANDIDATES_READY"
    EXECUTING = "EXECUTING"
    DONE = "DONE"
    FAILED = "FAILED"


class SessionError(Exception):
    def __init__(self, code: str, message: str, status: int = 409):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


@dataclass
class EpisodeRecord:
    session_id: str
    mode: str                  # rearrange | grasp | manual
    scene_before: dict
    scene_after: dict
    trajectory: dict
    reward: dict | None
    outcome: str
    sim_duration: float
    wall_duration: float

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id, "mode": self.mode,
            "scene_before": self.scene_before, "scene_after": self.scene_after,
            "trajectory": self.trajectory, "reward": self.reward,
            "outcome": self.outcome, "sim_duration": self.sim_duration,
            "wall_duration": self.wall_duration,
        }


@dataclass
class Session:
    id: str
    scene: Scene
    policy: TrajectoryPolicy | None
    data_dir: str | None = None
    seed: int = 0
    state: SessionState = SessionState.IDLE
    target_id: int | None = None
    candidates: dict[int, Candidate] = field(default_factory=dict)
    elapsed_sim_time: float = 0.0
    episodes: list[EpisodeRecord] = field(default_factory=list)
    event_log: list[dict] = field(default_factory=list)
    candidate_request_count: int = 0

    # -- helpers ------------------------------------------------------------

    def _require_state(self, *allowed: SessionState) -> None:
        if self.state not in allowed:
            raise SessionError(
                "invalid_state",
                f"operation not allowed in state {self.state.value}; "
                f"requires one of {[s.value for s in allowed]}")

    def _persist(self, record: EpisodeRecord) -> None:
        self.episodes.append(record)
        if self.data_dir:
            os.makedirs(self.data_dir, exist_ok=True)
            path = os.path.join(self.data_dir, f"{self.id}.jsonl")
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_dict()) + "\n")

    def _emit_trace(self, trace, mode: str, emit) -> None:
        for event in trace.events:
            payload = {
                "tick": event.tick,
                "gripper": [event.gripper[0], event.gripper[1]],
                "moved_objects": event.moved,
                "fallen": event.fallen,
                "state": self.state.value,
                "sim_time": self.elapsed_sim_time + event.t,
                "mode": mode,
            }
            self.event_log.append(payload)
            if emit:
                emit(payload)

    def _run_motion(self, traj, mode: str, emit) -> tuple[Scene, object]:
        after, trace = run_trajectory(self.scene, traj,
                                      record_every=EVENT_DECIMATION)
        self._emit_trace(trace, mode, emit)
        return after, trace

    def _emit_final(self, mode: str, emit) -> None:
        """Terminal stream marker carrying the post-operation state."""
        payload = {
            "tick": -1,
            "gripper": [self.scene.gripper.position[0],
                        self.scene.gripper.position[1]],
            "moved_objects": [], "fallen": [],
            "state": self.state.value,
            "sim_time": self.elapsed_sim_time,
            "mode": mode,
            "final": True,
        }
        self.event_log.append(payload)
        if emit:
            emit(payload)

    def clusters(self):
        cloud = render_pointcloud(self.scene)
        found, _ = dbscan(cloud)
        return found

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "state": self.state.value,
            "scene": scene_to_dict(self.scene),
            "target_id": self.target_id,
            "elapsed_sim_time": self.elapsed_sim_time,
            "episode_count": len(self.episodes),
            "candidates": [c.to_dict() for c in self.candidates.values()],
        }

    # -- operations ----------------------------------------------------------

    def set_target(self, click: tuple[float, float], emit=None) -> dict:
        self._require_state(SessionState.IDLE, SessionState.TARGET_SELECTED)
        clusters = self.clusters()
        if not clusters:
            raise SessionError("no_clusters", "no objects to select on the table")
        centroid, cluster_id = select_target(clusters, click)
        nearest = min(
            self.scene.objects,
            key=lambda o: (o.center[0] - centroid[0]) ** 2
                          + (o.center[1] - centroid[1]) ** 2)
        for obj in self.scene.objects:
            obj.is_target = obj.id == nearest.id
        self.target_id = nearest.id
        self.candidates = {}
        self.state = SessionState.TARGET_SELECTED
        return {"target_id": self.target_id, "cluster_id": cluster_id,
                "centroid": list(centroid)}

    def request_candidates(self, k: int = 4) -> list[Candidate]:
        # A repeated request replaces the previous set with fresh draws.
        self._require_state(SessionState.TARGET_SELECTED,
                            SessionState.CANDIDATES_READY)
        if self.policy is None:
            raise SessionError("no_policy", "no policy checkpoint loaded")
        if k < 1:
            raise SessionError("bad_request", "k must be >= 1", status=422)
        draw_seed = mix_seed(self.seed, "candidates", self.candidate_request_count)
        self.candidate_request_count += 1
        found = sample_candidates(self.scene, k, self.policy, seed=draw_seed)
        self.candidates = {c.id: c for c in found}
        self.state = SessionState.CANDIDATES_READY
        return found

    def execute(self, candidate_id: int, emit=None) -> EpisodeRecord:
        self._require_state(SessionState.CANDIDATES_READY)
        if candidate_id not in self.candidates:
            raise SessionError("unknown_candidate",
                               f"no candidate with id {candidate_id}", status=404)
        candidate = self.candidates[candidate_id]
        before = self.scene.copy()
        start = self.scene.gripper.position
        wall_start = time.perf_counter()

        self.state = SessionState.EXECUTING
        try:
            after, _ = self._run_motion(candidate.trajectory, "rearrange", emit)
        except Exception:
            self.state = SessionState.FAILED
            raise
        self.scene = after
        self.elapsed_sim_time += candidate.trajectory.duration
        self.candidates = {}
        self.state = SessionState.TARGET_SELECTED
        self._emit_final("rearrange", emit)

        reward = total_reward(before, after, start=start, target_id=self.target_id)
        record = EpisodeRecord(
            session_id=self.id, mode="rearrange",
            scene_before=scene_to_dict(before), scene_after=scene_to_dict(after),
            trajectory=candidate.trajectory.to_dict(stride=RECORD_STRIDE),
            reward=reward.to_dict(), outcome="executed",
            sim_duration=candidate.trajectory.duration,
            wall_duration=time.perf_counter() - wall_start)
        self._persist(record)
        return record

    def manual_step(self, direction: str, emit=None) -> EpisodeRecord:
        self._require_state(SessionState.TARGET_SELECTED)
        if direction not in MANUAL_DIRECTIONS:
            raise SessionError("bad_direction",
                               f"direction must be one of {sorted(MANUAL_DIRECTIONS)}",
                               status=422)
        dx, dy = MANUAL_DIRECTIONS[direction]
        gx, gy = self.scene.gripper.position
        goal = self.scene.table.clamp(gx + dx * MANUAL_STEP_LEN,
                                      gy + dy * MANUAL_STEP_LEN)
        before = self.scene.copy()
        wall_start = time.perf_counter()
        traj = retime_constant_speed([self.scene.gripper.position, goal],
                                     speed=0.1, rate=500.0)
        after, _ = self._run_motion(traj, "manual", emit)
        self.scene = after
        self.elapsed_sim_time += traj.duration
        self._emit_final("manual", emit)
        record = EpisodeRecord(
            session_id=self.id, mode="manual",
            scene_before=scene_to_dict(before), scene_after=scene_to_dict(after),
            trajectory=traj.to_dict(stride=RECORD_STRIDE),
            reward=None, outcome=f"step_{direction}",
            sim_duration=traj.duration,
            wall_duration=time.perf_counter() - wall_start)
        self._persist(record)
        return record

    def attempt_grasp(self, emit=None) -> dict:
        self._require_state(SessionState.TARGET_SELECTED)
        if self.target_id is None:
            raise SessionError("no_target", "no target selected")
        start = self.scene.gripper.position
        feasible, blockers = grasp_feasible(self.scene, start, self.target_id)
        if not feasible:
            return {"grasped": False, "blockers": blockers}

        target = self.scene.get(self.target_id)
        before = self.scene.copy()
        wall_start = time.perf_counter()
        traj = plan_grasp_approach(start, target.center)
        # The corridor is clear of standing obstacles, so the approach
        # glides in without pushing and closes on the target.
        after = self.scene.copy()
        after.gripper.position = target.center
        after.gripper.closed = True
        after.objects = [o for o in after.objects if o.id != self.target_id]
        _, trace = run_trajectory(
            Scene(table=self.scene.table, objects=[],
                  gripper=self.scene.gripper), traj,
            record_every=EVENT_DECIMATION)
        self._emit_trace(trace, "grasp", emit)
        self.scene = after
        self.elapsed_sim_time += traj.duration
        self.state = SessionState.DONE
        self._emit_final("grasp", emit)
        record = EpisodeRecord(
            session_id=self.id, mode="grasp",
            scene_before=scene_to_dict(before), scene_after=scene_to_dict(after),
            trajectory=traj.to_dict(stride=RECORD_STRIDE),
            reward=None, outcome="grasped",
            sim_duration=traj.duration,
            wall_duration=time.perf_counter() - wall_start)
        self._persist(record)
        return {"grasped": True, "blockers": [],
                "sim_duration": traj.duration}


class SessionManager:
    def __init__(self, policy: TrajectoryPolicy | None = None,
                 data_dir: str | None = None):
        self.policy = policy
        self.data_dir = data_dir
        self.sessions: dict[str, Session] = {}

    def create(self, seed: int | None = None,
               scene: Scene | None = None) -> Session:
        if scene is None:
            scene = randomize_scene(seed=seed if seed is not None else 0)
        scene.validate()
        session = Session(id=uuid.uuid4().hex[:12], scene=scene,
                          policy=self.policy, data_dir=self.data_dir,
                          seed=seed if seed is not None else 0)
        self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise SessionError("unknown_session",
                               f"no session {session_id}", status=404)
        return self.sessions[session_id]


def render_session_depth(session: Session):
    return render_depth(session.scene)
