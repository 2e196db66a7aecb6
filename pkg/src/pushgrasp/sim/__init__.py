from .scene import (
    Scene,
    SceneError,
    SceneObject,
    GripperState,
    TableSpec,
    RandomizationSpec,
    randomize_scene,
    scene_from_dict,
    scene_from_json,
    scene_to_dict,
    scene_to_json,
    default_gripper_home,
)
from .push import (
    ExecutionTrace,
    StepReport,
    TraceEvent,
    run_trajectory,
    step_push,
)
from .render import (
    DepthImage,
    PointCloud,
    depth_to_pgm,
    pgm_to_array,
    postprocess_depth,
    render_depth,
    render_pointcloud,
)
from .retime import Trajectory, RetimeError, retime_constant_speed, path_length

__all__ = [
    "Scene", "SceneError", "SceneObject", "GripperState", "TableSpec",
    "RandomizationSpec", "randomize_scene", "scene_from_dict", "scene_from_json",
    "scene_to_dict", "scene_to_json", "default_gripper_home",
    "ExecutionTrace", "StepReport", "TraceEvent", "run_trajectory", "step_push",
    "DepthImage", "PointCloud", "depth_to_pgm", "pgm_to_array",
    "postprocess_depth", "render_depth", "render_pointcloud",
    "Trajectory", "RetimeError", "retime_constant_speed", "path_length",
]
