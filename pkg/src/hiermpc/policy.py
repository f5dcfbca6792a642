"""Low-level policies mapping 25-dim commands to 19-dim joint controls.

The reference policy is an analytic PD velocity-tracking controller. It runs in
compiled form inside rollouts; ``policy_step`` exposes the same map to Python.
Any object with ``policy_step`` and ``control_period`` can stand in for a
learned policy; rollouts then step it from Python instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import InvalidInputError
from .types import COMMAND_DIM, CommandVector
from .worlds import kernels as K
from .worlds import layout as L
from .worlds.state import RobotState, WorldState

CONTROL_PERIOD = 0.02


@runtime_checkable
class LowLevelPolicy(Protocol):
    control_period: float

    def policy_step(self, state, command) -> np.ndarray: ...


def _robot_vector(state) -> np.ndarray:
    if isinstance(state, RobotState):
        x = state.to_vector()
    elif isinstance(state, WorldState):
        x = state.vector[:L.ROBOT_DIM]
    else:
        x = np.asarray(state, dtype=float)[:L.ROBOT_DIM]
    if x.shape != (L.ROBOT_DIM,):
        raise InvalidInputError(f"robot state needs {L.ROBOT_DIM} entries")
    return np.ascontiguousarray(x, dtype=float)


def _command_vector(command) -> np.ndarray:
    c = command.to_array() if isinstance(command, CommandVector) else np.asarray(command, dtype=float)
    if c.shape != (COMMAND_DIM,):
        raise InvalidInputError(f"command needs {COMMAND_DIM} entries, got shape {c.shape}")
    return np.ascontiguousarray(c)


@dataclass(frozen=True)
class Gains:
    vel: float = 4.0
    yaw: float = 4.0
    tilt_p: float = 60.0
    tilt_d: float = 15.0
    height_p: float = 40.0
    height_d: float = 12.0
    arm_p: float = 60.0
    arm_d: float = 15.0
    grip: float = 10.0
    leg_null: float = 0.2

    def to_array(self) -> np.ndarray:
        g = np.zeros(L.N_GAINS)
        g[L.K_VEL] = self.vel
        g[L.K_YAW] = self.yaw
        g[L.K_TILT_P] = self.tilt_p
        g[L.K_TILT_D] = self.tilt_d
        g[L.K_HEIGHT_P] = self.height_p
        g[L.K_HEIGHT_D] = self.height_d
        g[L.K_ARM_P] = self.arm_p
        g[L.K_ARM_D] = self.arm_d
        g[L.K_GRIP] = self.grip
        g[L.K_LEG_NULL] = self.leg_null
        return g


@dataclass(frozen=True)
class ReferencePolicy:
    """PD tracking of base velocity, torso pose, arm joints and gripper."""

    gains: Gains = field(default_factory=Gains)
    params: np.ndarray | None = None  # world parameter vector; defaults to WorldParams()
    control_period: float = CONTROL_PERIOD
    mode: int = L.MODE_POLICY

    def _params(self):
        if self.params is not None:
            return np.asarray(self.params, dtype=float)
        from .worlds import WorldParams

        return WorldParams().to_array()

    def policy_step(self, state, command) -> np.ndarray:
        x = _robot_vector(state)
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("robot state is not finite")
        c = _command_vector(command)
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("command is not finite")
        return K.policy_kernel(x, c, self._params(), self.gains.to_array(), K.LEG_MIX_PINV, K.LEG_NULL)


@dataclass(frozen=True)
class PassThroughPolicy:
    """Reads leg, arm and gripper entries of the command as joint controls."""

    control_period: float = CONTROL_PERIOD
    mode: int = L.MODE_PASSTHROUGH
    gains: Gains = field(default_factory=Gains)

    def policy_step(self, state, command) -> np.ndarray:
        c = _command_vector(command)
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("command is not finite")
        return K.passthrough_kernel(c)


def policy_step(robot_state, command, policy=None) -> np.ndarray:
    """Joint controls from the reference policy (or ``policy`` when given)."""
    return (policy or ReferencePolicy()).policy_step(robot_state, command)
