"""Haptic-guided shared-control teleoperation of a mobile manipulator:
deterministic simulator, control laws, planners, trial harness, and a live
operator bridge."""

from .core import (BaseVelocity, CellClass, JointVector7, OccupancyGrid,
                   OutOfBounds, Pose2D, Pose6, Wrench6, normalize_angle)
from .kinematics import (KinematicChain, forward_kinematics, jacobian,
                         nullspace_projector, pinv)
from .scenario import (ScenarioConfig, ScenarioError, default_scenario_path,
                       load_scenario, serialize_scenario)

__version__ = "0.1.0"

__all__ = [
    "BaseVelocity", "CellClass", "JointVector7", "KinematicChain",
    "OccupancyGrid", "OutOfBounds", "Pose2D", "Pose6", "ScenarioConfig",
    "ScenarioError", "Wrench6", "default_scenario_path",
    "forward_kinematics", "jacobian", "load_scenario", "normalize_angle",
    "nullspace_projector", "pinv", "serialize_scenario", "__version__",
]
