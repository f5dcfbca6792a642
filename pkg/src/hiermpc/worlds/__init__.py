from .base import (
    READY_ARM, HingeWorld, PushWorld, World, WorldParams, hinge_world_step, make_world,
    push_world_step,
)
from .layout import CONTROL_DIM
from .state import ObjectState, RobotState, WorldState
from .success import Outcome, TaskSpec, check_success

__all__ = [
    "CONTROL_DIM", "READY_ARM", "HingeWorld", "ObjectState", "Outcome", "PushWorld", "RobotState",
    "TaskSpec", "World", "WorldParams", "WorldState", "check_success", "hinge_world_step",
    "make_world", "push_world_step",
]
