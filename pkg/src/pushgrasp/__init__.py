"""Push-to-grasp teleoperation workbench.

A planar tabletop pushing simulator, a trajectory policy that proposes
obstacle-rearranging sweeps, density-based target selection, and an
operator session service tying them together.
"""

__version__ = "0.1.0"
