"""World state containers.

A ``WorldState`` wraps the flat vector the kernels integrate; ``robot`` and
``obj`` unpack it into named fields for callers that want them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layout as L


@dataclass(frozen=True)
class RobotState:
    base_pose: np.ndarray
    base_vel: np.ndarray
    arm_joints: np.ndarray
    arm_vel: np.ndarray
    effector_pos: np.ndarray
    gripper_pos: float
    torso_tilt: np.ndarray
    torso_height: float
    fallen: bool
    torso_rates: tuple = (0.0, 0.0)
    height_rate: float = 0.0

    def to_vector(self) -> np.ndarray:
        """Robot block of the flat state vector (effector position is derived, not stored)."""
        x = np.zeros(L.ROBOT_DIM)
        x[L.X:L.YAW + 1] = self.base_pose
        x[L.VX:L.WZ + 1] = self.base_vel
        x[L.PITCH:L.ROLL + 1] = self.torso_tilt
        x[L.PITCH_RATE:L.ROLL_RATE + 1] = self.torso_rates
        x[L.HEIGHT] = self.torso_height
        x[L.HEIGHT_RATE] = self.height_rate
        x[L.ARM_Q:L.ARM_Q + 6] = self.arm_joints
        x[L.ARM_QD:L.ARM_QD + 6] = self.arm_vel
        x[L.GRIP] = self.gripper_pos
        x[L.FALLEN] = float(self.fallen)
        return x


@dataclass(frozen=True)
class ObjectState:
    pose: np.ndarray  # (x, y, yaw) for the push world, (theta,) for the hinge world
    lin_vel: np.ndarray  # (vx, vy) or (omega,)
    orientation_quat: np.ndarray  # (w, x, y, z)
    mass: float
    friction_coeff: float


@dataclass(frozen=True)
class WorldState:
    kind: str
    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.vector)))

    def replace(self, **fields) -> WorldState:
        """Copy with named entries overwritten, e.g. ``replace(OX=1.0)``."""
        v = self.vector.copy()
        for name, value in fields.items():
            v[getattr(L, name)] = value
        return WorldState(self.kind, v)


def yaw_quat(yaw):
    yaw = np.asarray(yaw, dtype=float)
    out = np.zeros(yaw.shape + (4,))
    out[..., 0] = np.cos(0.5 * yaw)
    out[..., 3] = np.sin(0.5 * yaw)
    return out


def pitch_quat(theta):
    """Rotation by ``theta`` about the world y-axis (the hinge axis)."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape + (4,))
    out[..., 0] = np.cos(0.5 * theta)
    out[..., 2] = np.sin(0.5 * theta)
    return out
