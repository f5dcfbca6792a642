"""Hierarchical sample-based MPC for loco-manipulation at desk scale.

A CEM planner samples spline plans over high-level commands, a low-level
policy turns commands into joint controls inside every rollout, and a
receding-horizon loop executes the plans on small planar worlds.
"""

from .errors import ConfigError, InvalidInputError, LayoutError, SiteResolutionError, StructuralError
from .optimizer import CemConfig, plan_iteration
from .spline import NoiseSchedule, SplinePlan, evaluate_plan, shift_plan
from .types import ActionLayout, CommandDefaults, CommandVector, assemble_command

__version__ = "0.1.0"

__all__ = [
    "ActionLayout",
    "CemConfig",
    "CommandDefaults",
    "CommandVector",
    "ConfigError",
    "InvalidInputError",
    "LayoutError",
    "NoiseSchedule",
    "SiteResolutionError",
    "SplinePlan",
    "StructuralError",
    "assemble_command",
    "evaluate_plan",
    "plan_iteration",
    "shift_plan",
]
