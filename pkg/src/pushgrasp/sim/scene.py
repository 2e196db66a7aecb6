"""Tabletop scene model and seeded scene randomization.

The world is a rectangular table seen from above. Objects are upright
cylinders described by their footprint radius, height and base radius;
the base-to-height ratio decides how easily a push tips them over.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

SCENE_FORMAT_VERSION = 1


class SceneError(ValueError):
    """Invalid scene construction or serialization input."""


@dataclass
class TableSpec:
    x_range: tuple[float, float] = (0.0, 1.0)
    y_range: tuple[float, float] = (0.0, 0.6)
    camera_height: float = 1.0

    def __post_init__(self) -> None:
        if self.x_range[1] <= self.x_range[0] or self.y_range[1] <= self.y_range[0]:
            raise SceneError("table ranges must be non-degenerate")
        if self.camera_height <= 0:
            raise SceneError("camera height must be positive")

    @property
    def width(self) -> float:
        return self.x_range[1] - self.x_range[0]

    @property
    def depth(self) -> float:
        return self.y_range[1] - self.y_range[0]

    def contains(self, x: float, y: float) -> bool:
        return (self.x_range[0] <= x <= self.x_range[1]
                and self.y_range[0] <= y <= self.y_range[1])

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        return (min(max(x, self.x_range[0]), self.x_range[1]),
                min(max(y, self.y_range[0]), self.y_range[1]))


@dataclass
class SceneObject:
    id: int
    center: tuple[float, float]
    radius: float
    height: float
    base_radius: float
    standing: bool = True
    is_target: bool = False
    # Lying direction of a fallen cylinder; meaningful only when standing is False.
    axis: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self) -> None:
        if self.radius <= 0 or self.height <= 0:
            raise SceneError(f"object {self.id}: radius and height must be positive")
        if not (0 < self.base_radius <= self.radius):
            raise SceneError(f"object {self.id}: base_radius must be in (0, radius]")

    @property
    def tip_threshold(self) -> float:
        """Lateral-offset limit beyond which a contact tick tips the object."""
        return TIP_KAPPA * (self.base_radius / self.height) * self.radius


# Stability constant of the tip-over rule: an object falls on a contact tick
# when the perpendicular offset of its center from the gripper's motion line
# exceeds tip_threshold. Sized so wide-based objects survive being plowed
# around the gripper flank (exit offset approaches gripper+object radius,
# ~0.085 m at default sizes) while narrow-based ones topple on any glancing
# contact.
TIP_KAPPA = 8.0

DEFAULT_GRIPPER_RADIUS = 0.05


@dataclass
class GripperState:
    position: tuple[float, float]
    radius: float = DEFAULT_GRIPPER_RADIUS
    closed: bool = False

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise SceneError("gripper radius must be positive")


@dataclass
class Scene:
    table: TableSpec
    objects: list[SceneObject]
    gripper: GripperState

    def target(self) -> SceneObject:
        for obj in self.objects:
            if obj.is_target:
                return obj
        raise SceneError("scene has no target object")

    def get(self, object_id: int) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise SceneError(f"no object with id {object_id}")

    def copy(self) -> "Scene":
        return Scene(
            table=self.table,
            objects=[replace(o) for o in self.objects],
            gripper=replace(self.gripper),
        )

    def validate(self) -> None:
        targets = [o for o in self.objects if o.is_target]
        if len(targets) != 1:
            raise SceneError(f"scene must have exactly one target, found {len(targets)}")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SceneError("object ids must be unique")
        tallest = max((o.height for o in self.objects), default=0.0)
        if tallest >= self.table.camera_height:
            raise SceneError("camera height must exceed the tallest object")


@dataclass
class RandomizationSpec:
    """Knobs for seeded scene generation; counts include the target."""
    count_range: tuple[int, int] = (5, 7)
    radius_range: tuple[float, float] = (0.02, 0.05)
    thin_fraction: float = 0.3
    # Thin objects are tall with a narrow base, squat ones short with a wide base.
    thin_height_range: tuple[float, float] = (0.15, 0.25)
    thin_base_ratio_range: tuple[float, float] = (0.1, 0.3)
    squat_height_range: tuple[float, float] = (0.05, 0.12)
    squat_base_ratio_range: tuple[float, float] = (0.6, 1.0)
    min_separation: float = 0.13
    gripper_home: tuple[float, float] | None = None  # defaults to left edge mid-table
    max_attempts: int = 2000

    def to_dict(self) -> dict:
        return {
            "count_range": list(self.count_range),
            "radius_range": list(self.radius_range),
            "thin_fraction": self.thin_fraction,
            "thin_height_range": list(self.thin_height_range),
            "thin_base_ratio_range": list(self.thin_base_ratio_range),
            "squat_height_range": list(self.squat_height_range),
            "squat_base_ratio_range": list(self.squat_base_ratio_range),
            "min_separation": self.min_separation,
            "gripper_home": list(self.gripper_home) if self.gripper_home else None,
            "max_attempts": self.max_attempts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RandomizationSpec":
        kwargs = {}
        for key, value in data.items():
            if key not in cls.__dataclass_fields__:
                raise SceneError(f"unknown randomization field: {key}")
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs)


def default_gripper_home(table: TableSpec) -> tuple[float, float]:
    return (table.x_range[0] + DEFAULT_GRIPPER_RADIUS,
            0.5 * (table.y_range[0] + table.y_range[1]))


def randomize_scene(seed: int, spec: RandomizationSpec | None = None,
                    table: TableSpec | None = None) -> Scene:
    """Build a seeded random scene of standing cylinders with one target.

    Placement is rejection sampling against the pairwise separation floor
    and a clearance disk around the gripper home; raises SceneError when
    the attempt budget runs out.
    """
    spec = spec or RandomizationSpec()
    table = table or TableSpec()
    rng = np.random.default_rng(seed)

    lo, hi = spec.count_range
    if lo < 1 or hi < lo:
        raise SceneError("count_range must satisfy 1 <= lo <= hi")
    count = int(rng.integers(lo, hi + 1))
    home = spec.gripper_home or default_gripper_home(table)
    gripper = GripperState(position=home)

    centers: list[tuple[float, float]] = []
    objects: list[SceneObject] = []
    attempts = 0
    for idx in range(count):
        radius = float(rng.uniform(*spec.radius_range))
        if rng.uniform() < spec.thin_fraction:
            height = float(rng.uniform(*spec.thin_height_range))
            base_radius = radius * float(rng.uniform(*spec.thin_base_ratio_range))
        else:
            height = float(rng.uniform(*spec.squat_height_range))
            base_radius = radius * float(rng.uniform(*spec.squat_base_ratio_range))
        while True:
            attempts += 1
            if attempts > spec.max_attempts:
                raise SceneError(
                    f"could not place {count} objects with separation "
                    f"{spec.min_separation} after {spec.max_attempts} attempts")
            x = float(rng.uniform(table.x_range[0] + radius, table.x_range[1] - radius))
            y = float(rng.uniform(table.y_range[0] + radius, table.y_range[1] - radius))
            if math.hypot(x - home[0], y - home[1]) < gripper.radius + radius + 0.02:
                continue
            if all(math.hypot(x - cx, y - cy) >= spec.min_separation
                   for cx, cy in centers):
                break
        centers.append((x, y))
        objects.append(SceneObject(
            id=idx, center=(x, y), radius=radius, height=height,
            base_radius=base_radius))

    target_idx = int(rng.integers(0, count))
    objects[target_idx].is_target = True

    scene = Scene(table=table, objects=objects, gripper=gripper)
    scene.validate()
    return scene


def scene_to_dict(scene: Scene) -> dict:
    return {
        "version": SCENE_FORMAT_VERSION,
        "table": {
            "x_range": list(scene.table.x_range),
            "y_range": list(scene.table.y_range),
            "camera_height": scene.table.camera_height,
        },
        "objects": [
            {
                "id": o.id,
                "center": list(o.center),
                "radius": o.radius,
                "height": o.height,
                "base_radius": o.base_radius,
                "standing": o.standing,
                "is_target": o.is_target,
                "axis": list(o.axis),
            }
            for o in scene.objects
        ],
        "gripper": {
            "position": list(scene.gripper.position),
            "radius": scene.gripper.radius,
            "closed": scene.gripper.closed,
        },
    }


def scene_from_dict(data: dict) -> Scene:
    version = data.get("version")
    if version != SCENE_FORMAT_VERSION:
        raise SceneError(f"unsupported scene format version: {version!r}")
    table = TableSpec(
        x_range=tuple(data["table"]["x_range"]),
        y_range=tuple(data["table"]["y_range"]),
        camera_height=data["table"]["camera_height"],
    )
    objects = [
        SceneObject(
            id=o["id"],
            center=tuple(o["center"]),
            radius=o["radius"],
            height=o["height"],
            base_radius=o["base_radius"],
            standing=o["standing"],
            is_target=o["is_target"],
            axis=tuple(o.get("axis", (1.0, 0.0))),
        )
        for o in data["objects"]
    ]
    gripper = GripperState(
        position=tuple(data["gripper"]["position"]),
        radius=data["gripper"]["radius"],
        closed=data["gripper"]["closed"],
    )
    scene = Scene(table=table, objects=objects, gripper=gripper)
    scene.validate()
    return scene


def scene_to_json(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene))


def scene_from_json(text: str) -> Scene:
    return scene_from_dict(json.loads(text))
