"""Command and action vectors, and the planner-to-policy command assembly.

The low-level policy consumes a 25-dim command laid out as::

    [base_vel(3) | arm_targets(6) | gripper_pos(1) | leg_targets(12) | torso_pose(3)]

Leg targets are ordered FL, FR, HL, HR with three joints per leg. Torso pose is
(pitch, roll, height).

The planner samples a configurable subset of the blocks
``[base(3), arm(6), torso(3), leg(7), gripper(1)]``. The 7-dim leg block is a
selection variable followed by six front-leg joint targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, LayoutError

COMMAND_DIM = 25
BASE = slice(0, 3)
ARM = slice(3, 9)
GRIPPER = 9
LEG = slice(10, 22)
TORSO = slice(22, 25)

LEG_NAMES = ("FL", "FR", "HL", "HR")

BLOCK_ORDER = ("base", "arm", "torso", "leg", "gripper")
BLOCK_DIMS = {"base": 3, "arm": 6, "torso": 3, "leg": 7, "gripper": 1}

DEFAULT_BOUNDS = {
    "base": [(-0.8, 0.8), (-0.5, 0.5), (-1.0, 1.0)],
    "arm": [(-2.6, 2.6)] * 6,
    "torso": [(-0.3, 0.3), (-0.3, 0.3), (0.35, 0.6)],
    "leg": [(-1.0, 1.0)] + [(-1.5, 1.5)] * 6,
    "gripper": [(-1.0, 1.0)],
}


def _finite(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class CommandVector:
    base_vel: np.ndarray
    arm_targets: np.ndarray
    gripper_pos: float
    leg_targets: np.ndarray
    torso_pose: np.ndarray

    def __post_init__(self):
        for name, dim in (("base_vel", 3), ("arm_targets", 6), ("leg_targets", 12), ("torso_pose", 3)):
            arr = _finite(getattr(self, name), name).reshape(-1)
            if arr.shape != (dim,):
                raise LayoutError(f"{name} must have dimension {dim}, got {arr.shape[0]}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gripper_pos", float(_finite(self.gripper_pos, "gripper_pos")))

    def to_array(self) -> np.ndarray:
        out = np.empty(COMMAND_DIM)
        out[BASE] = self.base_vel
        out[ARM] = self.arm_targets
        out[GRIPPER] = self.gripper_pos
        out[LEG] = self.leg_targets
        out[TORSO] = self.torso_pose
        return out

    @classmethod
    def from_array(cls, arr) -> CommandVector:
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (COMMAND_DIM,):
            raise LayoutError(f"command must have dimension {COMMAND_DIM}, got {arr.shape}")
        return cls(arr[BASE], arr[ARM], arr[GRIPPER], arr[LEG], arr[TORSO])


@dataclass(frozen=True)
class CommandDefaults:
    """Padding for command blocks the planner does not sample."""

    default_torso: tuple = (0.0, 0.0, 0.5)
    gripper_open: float = -1.0
    gripper_close: float = 0.0
    default_leg: tuple = (0.0,) * 12

    def __post_init__(self):
        if np.any(np.asarray(self.default_leg, dtype=float) != 0.0):
            raise InvalidInputError("default_leg must be the zero vector")
        if len(self.default_leg) != 12 or len(self.default_torso) != 3:
            raise LayoutError("default_leg must have 12 entries and default_torso 3")

    @property
    def default_gripper(self) -> float:
        # unsampled gripper is held closed
        return self.gripper_close


@dataclass(frozen=True)
class ActionLayout:
    """Which command blocks the planner samples, with per-dimension bounds."""

    include_base: bool = True
    include_arm: bool = True
    include_torso: bool = False
    include_leg: bool = False
    include_gripper: bool = False
    bounds: tuple | None = None
    nominal: tuple | None = None

    def __post_init__(self):
        bounds = self.bounds
        if bounds is None:
            bounds = [b for name in self.blocks for b in DEFAULT_BOUNDS[name]]
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != self.dim:
            raise LayoutError(f"layout needs {self.dim} bounds, got {len(bounds)}")
        if any(not lo < hi for lo, hi in bounds):
            raise LayoutError("every bound must satisfy lower < upper")
        object.__setattr__(self, "bounds", bounds)
        if self.nominal is not None:
            nominal = tuple(float(v) for v in self.nominal)
            if len(nominal) != self.dim:
                raise LayoutError(f"nominal action needs {self.dim} entries, got {len(nominal)}")
            object.__setattr__(self, "nominal", nominal)

    @property
    def blocks(self) -> tuple[str, ...]:
        flags = {
            "base": self.include_base,
            "arm": self.include_arm,
            "torso": self.include_torso,
            "leg": self.include_leg,
            "gripper": self.include_gripper,
        }
        return tuple(name for name in BLOCK_ORDER if flags[name])

    @property
    def dim(self) -> int:
        return sum(BLOCK_DIMS[name] for name in self.blocks)

    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for name in self.blocks:
            out[name] = slice(start, start + BLOCK_DIMS[name])
            start += BLOCK_DIMS[name]
        return out

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    def clip(self, actions: np.ndarray) -> np.ndarray:
        return np.clip(actions, self.lower, self.upper)

    def nominal_action(self) -> np.ndarray:
        if self.nominal is not None:
            return np.array(self.nominal)
        return np.clip(np.zeros(self.dim), self.lower, self.upper)


def mask_leg_command(a_leg) -> np.ndarray:
    """Threshold the selection variable into front-left, front-right or no leg."""
    a_leg = _finite(a_leg, "a_leg")
    if a_leg.shape != (7,):
        raise LayoutError(f"leg action must have dimension 7, got {a_leg.shape}")
    return _mask_legs(a_leg[None, :])[0]


def _mask_legs(a_leg: np.ndarray) -> np.ndarray:
    s = a_leg[:, :1]
    c = a_leg[:, 1:]
    out = np.zeros_like(c)
    out[:, :3] = np.where(s < -0.5, c[:, :3], 0.0)
    out[:, 3:] = np.where(s > 0.5, c[:, 3:], 0.0)
    return out


def map_gripper(a_gripper: float, open_pos: float, close_pos: float) -> float:
    """Binary gripper: positive actions close, everything else opens."""
    a, o, c = (float(_finite(v, "gripper")) for v in (a_gripper, open_pos, close_pos))
    return c if a > 0 else o


def assemble_commands(actions: np.ndarray, layout: ActionLayout, defaults: CommandDefaults) -> np.ndarray:
    """Vectorized assembly of a (T, layout.dim) action array into (T, 25) commands."""
    actions = np.asarray(actions, dtype=float)
    if actions.ndim != 2 or actions.shape[1] != layout.dim:
        raise LayoutError(f"actions must have shape (T, {layout.dim}), got {actions.shape}")
    n = actions.shape[0]
    out = np.zeros((n, COMMAND_DIM))
    out[:, TORSO] = defaults.default_torso
    out[:, GRIPPER] = defaults.default_gripper
    for name, sl in layout.slices().items():
        block = actions[:, sl]
        if name == "base":
            out[:, BASE] = block
        elif name == "arm":
            out[:, ARM] = block
        elif name == "torso":
            out[:, TORSO] = block
        elif name == "leg":
            # front legs occupy the first six slots of the 12-vector; rear legs stay zero
            out[:, 10:16] = _mask_legs(block)
        elif name == "gripper":
            out[:, GRIPPER] = np.where(block[:, 0] > 0, defaults.gripper_close, defaults.gripper_open)
    return out


def assemble_command(action, layout: ActionLayout, defaults: CommandDefaults) -> CommandVector:
    action = _finite(action, "action")
    if action.shape != (layout.dim,):
        raise LayoutError(f"action must have dimension {layout.dim}, got {action.shape}")
    return CommandVector.from_array(assemble_commands(action[None, :], layout, defaults)[0])
