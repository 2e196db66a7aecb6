"""Quasi-static planar pushing.

Per control tick the gripper disk advances one short segment; any standing
object it overlaps is projected out radially, object-object overlaps are
resolved by bounded pairwise sweeps, and the tip-over rule marks objects
fallen when the contact is too far off the gripper's motion line.
No velocities or inertia: displacement is purely positional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .retime import Trajectory
from .scene import Scene, SceneError

# Longest segment a single tick may sweep; callers traverse longer motions
# through a retimed trajectory.
MAX_TICK_SEGMENT = 1.1e-3
SEPARATION_SWEEPS = 16
SEPARATION_TOL = 1e-6


@dataclass
class StepReport:
    moved_ids: list[int] = field(default_factory=list)
    newly_fallen: list[int] = field(default_factory=list)
    target_displacement: tuple[float, float] = (0.0, 0.0)


@dataclass
class TraceEvent:
    tick: int
    t: float
    gripper: tuple[float, float]
    moved: list[dict] = field(default_factory=list)
    fallen: list[int] = field(default_factory=list)


@dataclass
class ExecutionTrace:
    events: list[TraceEvent] = field(default_factory=list)
    newly_fallen: list[int] = field(default_factory=list)
    target_displacement: tuple[float, float] = (0.0, 0.0)
    contact_ticks: int = 0
    total_ticks: int = 0
    duration: float = 0.0


class _SimState:
    """Mutable flat view of a scene used by the tick loop."""

    __slots__ = ("ids", "xs", "ys", "radii", "thresholds", "standing",
                 "axes", "target_idx", "gx", "gy", "rg", "table")

    def __init__(self, scene: Scene):
        objs = scene.objects
        self.ids = [o.id for o in objs]
        self.xs = [o.center[0] for o in objs]
        self.ys = [o.center[1] for o in objs]
        self.radii = [o.radius for o in objs]
        self.thresholds = [o.tip_threshold for o in objs]
        self.standing = [o.standing for o in objs]
        self.axes = [o.axis for o in objs]
        self.target_idx = next((i for i, o in enumerate(objs) if o.is_target), -1)
        self.gx, self.gy = scene.gripper.position
        self.rg = scene.gripper.radius
        self.table = scene.table

    def write_back(self, scene: Scene) -> None:
        for i, obj in enumerate(scene.objects):
            obj.center = (self.xs[i], self.ys[i])
            obj.standing = self.standing[i]
            obj.axis = self.axes[i]
        scene.gripper.position = (self.gx, self.gy)


def _tick(state: _SimState, ax: float, ay: float, bx: float, by: float,
          report: StepReport | None = None) -> bool:
    """Advance the gripper from (ax, ay) to (bx, by) and resolve contacts.

    Returns True when any object moved or fell.
    """
    dx, dy = bx - ax, by - ay
    step_len = math.hypot(dx, dy)
    if step_len > 1e-12:
        ux, uy = dx / step_len, dy / step_len
    else:
        ux, uy = 1.0, 0.0
    state.gx, state.gy = bx, by

    n = len(state.xs)
    touched = False
    moved: set[int] = set()

    for i in range(n):
        if not state.standing[i]:
            continue
        cx, cy = state.xs[i] - bx, state.ys[i] - by
        reach = state.rg + state.radii[i]
        dist = math.hypot(cx, cy)
        if dist >= reach:
            continue
        if dist > 1e-12:
            px, py = cx / dist, cy / dist
        else:
            px, py = ux, uy
        depth = reach - dist
        state.xs[i] += px * depth
        state.ys[i] += py * depth
        touched = True
        moved.add(i)
        if step_len > 1e-12:
            # Lateral offset of the object center from the motion line.
            lateral = abs(ux * (state.ys[i] - by) - uy * (state.xs[i] - bx))
            if lateral > state.thresholds[i]:
                state.standing[i] = False
                state.axes[i] = (ux, uy)
                if report is not None:
                    report.newly_fallen.append(state.ids[i])

    if touched:
        for _ in range(SEPARATION_SWEEPS):
            worst = 0.0
            for i in range(n):
                for j in range(i + 1, n):
                    if not (state.standing[i] or state.standing[j]):
                        continue
                    ddx = state.xs[j] - state.xs[i]
                    ddy = state.ys[j] - state.ys[i]
                    min_dist = state.radii[i] + state.radii[j]
                    dist = math.hypot(ddx, ddy)
                    overlap = min_dist - dist
                    if overlap <= SEPARATION_TOL:
                        continue
                    worst = max(worst, overlap)
                    if dist > 1e-12:
                        sx, sy = ddx / dist, ddy / dist
                    else:
                        sx, sy = ux, uy
                    if state.standing[i] and state.standing[j]:
                        half = 0.5 * overlap
                        state.xs[i] -= sx * half
                        state.ys[i] -= sy * half
                        state.xs[j] += sx * half
                        state.ys[j] += sy * half
                        moved.update((i, j))
                    elif state.standing[j]:
                        state.xs[j] += sx * overlap
                        state.ys[j] += sy * overlap
                        moved.add(j)
                    else:
                        state.xs[i] -= sx * overlap
                        state.ys[i] -= sy * overlap
                        moved.add(i)
            if worst <= SEPARATION_TOL:
                break

        table = state.table
        for i in moved:
            if state.standing[i] and not table.contains(state.xs[i], state.ys[i]):
                state.standing[i] = False
                state.axes[i] = (ux, uy)
                if report is not None:
                    report.newly_fallen.append(state.ids[i])

        if report is not None:
            report.moved_ids.extend(state.ids[i] for i in sorted(moved))

    return touched


def step_push(scene: Scene, start: tuple[float, float],
              end: tuple[float, float]) -> tuple[Scene, StepReport]:
    """Sweep one control-tick segment; pure (returns a fresh scene)."""
    seg = math.hypot(end[0] - start[0], end[1] - start[1])
    if seg > MAX_TICK_SEGMENT:
        raise SceneError(
            f"tick segment of {seg:.4g} m exceeds {MAX_TICK_SEGMENT} m; "
            "retime longer motions into ticks")
    out = scene.copy()
    state = _SimState(out)
    state.gx, state.gy = start
    report = StepReport()
    if state.target_idx >= 0:
        tx0, ty0 = state.xs[state.target_idx], state.ys[state.target_idx]
    _tick(state, start[0], start[1], end[0], end[1], report)
    if state.target_idx >= 0:
        report.target_displacement = (state.xs[state.target_idx] - tx0,
                                      state.ys[state.target_idx] - ty0)
    state.write_back(out)
    return out, report


def _emit(trace: ExecutionTrace, state: _SimState, tick: int, t: float,
          last_pose: dict) -> None:
    moved = []
    fallen = []
    for i, oid in enumerate(state.ids):
        pose = (state.xs[i], state.ys[i], state.standing[i])
        if last_pose.get(oid) != pose:
            moved.append({"id": oid, "center": [state.xs[i], state.ys[i]],
                          "standing": state.standing[i]})
            if last_pose.get(oid, (0, 0, True))[2] and not state.standing[i]:
                fallen.append(oid)
            last_pose[oid] = pose
    trace.events.append(TraceEvent(tick=tick, t=t, gripper=(state.gx, state.gy),
                                   moved=moved, fallen=fallen))


def run_trajectory(scene: Scene, traj: Trajectory,
                   record_every: int | None = None,
                   _naive: bool = False) -> tuple[Scene, ExecutionTrace]:
    """Execute a retimed trajectory tick by tick; pure (returns a fresh scene).

    Skips ahead over spans where the gripper provably touches nothing (no
    sample position overlaps any standing object), which is exact because
    untouched objects never move. Set _naive to force per-tick stepping;
    both modes produce bit-identical scenes.
    """
    out = scene.copy()
    state = _SimState(out)
    samples = traj.samples
    n_ticks = len(samples) - 1
    trace = ExecutionTrace(total_ticks=n_ticks, duration=traj.duration)

    if len(samples) == 0:
        state.write_back(out)
        return out, trace

    sx, sy = float(samples[0, 1]), float(samples[0, 2])
    if math.hypot(sx - state.gx, sy - state.gy) > 1e-6:
        raise SceneError("trajectory must start at the current gripper position")
    state.gx, state.gy = sx, sy

    if state.target_idx >= 0:
        tx0, ty0 = state.xs[state.target_idx], state.ys[state.target_idx]

    last_pose: dict = {}
    if record_every:
        _emit(trace, state, 0, float(samples[0, 0]), last_pose)

    report = StepReport()
    xs_col = samples[:, 1]
    ys_col = samples[:, 2]
    # Proximity band within which the scalar loop keeps stepping after contact.
    slack = 0.002
    chunk = 4096
    k = 0
    next_record = record_every if record_every else None

    def record_up_to(tick: int) -> None:
        nonlocal next_record
        if next_record is None:
            return
        while next_record <= tick:
            # Positions of skipped ticks come straight from the samples.
            saved_gx, saved_gy = state.gx, state.gy
            state.gx, state.gy = float(xs_col[next_record]), float(ys_col[next_record])
            _emit(trace, state, next_record, float(samples[next_record, 0]), last_pose)
            state.gx, state.gy = saved_gx, saved_gy
            next_record += record_every

    while k < n_ticks:
        standing_idx = [i for i in range(len(state.xs)) if state.standing[i]]
        if not standing_idx and not _naive:
            state.gx, state.gy = float(xs_col[n_ticks]), float(ys_col[n_ticks])
            record_up_to(n_ticks)
            k = n_ticks
            break

        if not _naive:
            end = min(k + chunk, n_ticks)
            seg_x = xs_col[k + 1:end + 1]
            seg_y = ys_col[k + 1:end + 1]
            contact_at = None
            for i in standing_idx:
                reach = state.rg + state.radii[i]
                hits = np.flatnonzero(
                    (seg_x - state.xs[i]) ** 2 + (seg_y - state.ys[i]) ** 2
                    < reach * reach)
                if hits.size and (contact_at is None or hits[0] < contact_at):
                    contact_at = int(hits[0])
            if contact_at is None:
                state.gx, state.gy = float(xs_col[end]), float(ys_col[end])
                record_up_to(end)
                k = end
                continue
            if contact_at > 0:
                jump = k + contact_at  # last tick with no overlap
                state.gx, state.gy = float(xs_col[jump]), float(ys_col[jump])
                record_up_to(jump)
                k = jump

        # Scalar stepping through the contact neighborhood.
        while k < n_ticks:
            if _tick(state, float(xs_col[k]), float(ys_col[k]),
                     float(xs_col[k + 1]), float(ys_col[k + 1]), report):
                trace.contact_ticks += 1
            k += 1
            record_up_to(k)
            if _naive:
                continue
            near = any(
                state.standing[i]
                and math.hypot(state.xs[i] - state.gx, state.ys[i] - state.gy)
                < state.rg + state.radii[i] + slack
                for i in range(len(state.xs)))
            if not near:
                break

    if record_every and (not trace.events or trace.events[-1].tick != n_ticks):
        _emit(trace, state, n_ticks, float(samples[-1, 0]), last_pose)

    trace.newly_fallen = report.newly_fallen
    if state.target_idx >= 0:
        trace.target_displacement = (state.xs[state.target_idx] - tx0,
                                     state.ys[state.target_idx] - ty0)
    state.write_back(out)
    return out, trace
