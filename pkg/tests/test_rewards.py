import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pushgrasp.rewards import (
    RewardError,
    grasp_feasible,
    margin_reward,
    safety_reward,
    segment_point_distance,
    total_reward,
)
from pushgrasp.sim import GripperState, Scene, SceneObject, TableSpec


def build_scene(obstacles, target=(0.8, 0.3), gripper=(0.0, 0.3)):
    objs = [SceneObject(id=i, center=c, radius=r, height=0.1,
                        base_radius=0.02, standing=standing)
            for i, (c, r, standing) in enumerate(obstacles)]
    objs.append(SceneObject(id=100, center=target, radius=0.03, height=0.1,
                            base_radius=0.02, is_target=True))
    return Scene(table=TableSpec(), objects=objs,
                 gripper=GripperState(position=gripper))


def test_segment_distance_perpendicular_foot():
    assert segment_point_distance((0, 0), (1, 0), (0.5, 0.3)) == pytest.approx(0.3)


def test_segment_distance_beyond_endpoint():
    assert segment_point_distance((0, 0), (1, 0), (2, 0)) == pytest.approx(1.0)


def test_segment_distance_degenerate_segment():
    assert segment_point_distance((0, 0), (0, 0), (0, 1)) == pytest.approx(1.0)


def test_margin_reward_branch_values():
    assert margin_reward(0.05) == pytest.approx(-25.0)
    assert margin_reward(0.25) == pytest.approx(2.5)
    assert margin_reward(0.30) == pytest.approx(15.0)


def test_margin_reward_boundaries_first_match():
    assert margin_reward(0.1) == pytest.approx(100 * 0.1 - 30)
    assert margin_reward(0.2) == pytest.approx(100 * 0.2 - 25)


def test_safety_reward_flat_values():
    before = build_scene([((0.4, 0.3), 0.03, True)])
    after_ok = build_scene([((0.4, 0.35), 0.03, True)])
    after_fall = build_scene([((0.4, 0.35), 0.03, False)])
    assert safety_reward(before, after_ok) == 10.0
    assert safety_reward(before, after_fall) == -30.0


def test_safety_penalty_is_existential_not_per_object():
    before = build_scene([((0.3, 0.2), 0.03, True), ((0.4, 0.4), 0.03, True),
                          ((0.5, 0.2), 0.03, True)])
    after = build_scene([((0.3, 0.2), 0.03, False), ((0.4, 0.4), 0.03, False),
                         ((0.5, 0.2), 0.03, False)])
    assert safety_reward(before, after) == -30.0


def test_safety_requires_matching_ids():
    before = build_scene([((0.4, 0.3), 0.03, True)])
    after = build_scene([((0.4, 0.3), 0.03, True), ((0.2, 0.2), 0.03, True)])
    with pytest.raises(RewardError):
        safety_reward(before, after)


def test_total_reward_two_obstacles_no_falls():
    # Obstacles at perpendicular distances 0.05 and 0.30 from the segment.
    scene = build_scene([((0.4, 0.35), 0.03, True), ((0.4, 0.6), 0.03, True)],
                        target=(0.8, 0.3))
    breakdown = total_reward(scene, scene, start=(0.0, 0.3), target_id=100)
    assert breakdown.total == pytest.approx(-25.0 + 15.0 + 10.0)
    assert breakdown.total == pytest.approx(0.0)


def test_total_reward_fall_case():
    before = build_scene([((0.4, 0.45), 0.03, True)])
    after = build_scene([((0.4, 0.45), 0.03, False)])
    breakdown = total_reward(before, after, start=(0.0, 0.3), target_id=100)
    # One obstacle at d=0.15 plus the fall penalty.
    assert breakdown.total == pytest.approx(-10.0 - 30.0)
    assert breakdown.newly_fallen == [0]


def test_total_reward_empty_scene_is_safety_only():
    scene = build_scene([])
    breakdown = total_reward(scene, scene, start=(0.0, 0.3), target_id=100)
    assert breakdown.total == pytest.approx(10.0)
    assert breakdown.margin_terms == []


def test_total_reward_breakdown_sums_exactly():
    scene = build_scene([((0.3, 0.37), 0.03, True), ((0.55, 0.18), 0.04, True),
                         ((0.2, 0.55), 0.02, False)])
    b = total_reward(scene, scene, start=(0.0, 0.3), target_id=100)
    assert b.total == math.fsum([r for _, _, r in b.margin_terms] + [b.safety])
    # Fallen obstacles still carry margin terms.
    assert len(b.margin_terms) == 3


def test_total_reward_missing_target():
    scene = build_scene([])
    with pytest.raises(Exception):
        total_reward(scene, scene, start=(0.0, 0.3), target_id=42)


def test_grasp_feasible_empty_scene():
    scene = build_scene([])
    ok, blockers = grasp_feasible(scene, (0.0, 0.3), 100)
    assert ok and blockers == []


def test_grasp_blocked_by_midpoint_obstacle():
    scene = build_scene([((0.4, 0.3), 0.03, True)])
    ok, blockers = grasp_feasible(scene, (0.0, 0.3), 100)
    assert not ok and blockers == [0]


def test_grasp_boundary_is_infeasible():
    # Values exact in binary so the clearance equals the boundary exactly.
    halfwidth = 0.0625
    radius = 0.03125
    scene = build_scene([((0.4, 0.25 + halfwidth + radius), radius, True)],
                        target=(0.8, 0.25))
    ok, blockers = grasp_feasible(scene, (0.0, 0.25), 100,
                                  corridor_halfwidth=halfwidth)
    assert not ok and blockers == [0]


def test_fallen_obstacles_do_not_block():
    scene = build_scene([((0.4, 0.3), 0.03, False)])
    ok, blockers = grasp_feasible(scene, (0.0, 0.3), 100)
    assert ok


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.5))
def test_margin_matches_direct_transcription(d):
    # Independently coded piecewise form.
    if d <= 0.1:
        expected = 100 * d - 30
    elif d <= 0.2:
        expected = 100 * d - 25
    elif d <= 0.25:
        expected = 100 * d - 22.5
    else:
        expected = 15.0
    assert margin_reward(d) == expected


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.2), st.floats(0.0, 0.2))
def test_feasibility_monotone_in_corridor_width(base, extra):
    scene = build_scene([((0.45, 0.38), 0.03, True), ((0.3, 0.22), 0.04, True)])
    ok_narrow, _ = grasp_feasible(scene, (0.0, 0.3), 100, corridor_halfwidth=base)
    ok_wide, _ = grasp_feasible(scene, (0.0, 0.3), 100,
                                corridor_halfwidth=base + extra)
    # Widening the corridor can only lose feasibility, never gain it.
    if not ok_narrow:
        assert not ok_wide
