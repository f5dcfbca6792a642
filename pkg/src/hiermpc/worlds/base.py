"""Desk-scale worlds: a planar push world and a hinged-plate world.

Both share one robot model: a velocity-tracking base disk whose torso tilt is an
unstable inverted pendulum, a two-link arm driving the effector, and a gripper.
Leg joint controls reach the body only through a fixed mixing map onto six
body accelerations, so raw joint-level control has to balance the torso itself.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ..costs.frame import LazyTable, SiteFrame
from ..errors import InvalidInputError
from . import kernels as K
from . import layout as L
from .state import ObjectState, RobotState, WorldState, pitch_quat, yaw_quat

READY_ARM = (0.0, 2.4, 0.0, 0.0, 0.0, 0.0)
FOOT_OFFSETS = {"fl_foot": (0.35, 0.2), "fr_foot": (0.35, -0.2)}


@dataclass(frozen=True)
class WorldParams:
    g: float = 9.81
    base_acc: float = 3.0
    yaw_acc: float = 6.0
    height_acc: float = 4.0
    tilt_acc: float = 40.0
    arm_acc: float = 20.0
    grip_rate: float = 4.0
    base_drag: float = 0.5
    yaw_drag: float = 0.5
    height_damp: float = 2.0
    nom_height: float = 0.5
    fall_tilt: float = 0.6
    arm_damp: float = 1.0
    arm_limit: float = 2.6
    height_min: float = 0.3
    height_max: float = 0.65
    grip_min: float = -1.0
    grip_max: float = 0.0
    shoulder_x: float = 0.25
    l1: float = 0.45
    l2: float = 0.45
    shoulder_z: float = -0.05
    eff_z: float = 0.2
    base_radius: float = 0.3
    eff_radius: float = 0.05
    # contact constants are invented plumbing, chosen for stable 5 ms substeps
    contact_k: float = 3000.0
    contact_b: float = 30.0
    contact_mu: float = 0.5
    tangent_b: float = 30.0
    obj_mass: float = 1.5
    obj_radius: float = 0.2
    obj_height: float = 0.4
    ground_mu: float = 0.5
    pivot_x: float = 1.4
    pivot_y: float = 0.0
    plate_len: float = 0.8
    plate_width: float = 1.0
    plate_radius: float = 0.04
    balance_angle: float = math.radians(60.0)
    hinge_damp: float = 0.3
    dt: float = 0.02
    substeps: int = 4

    def __post_init__(self):
        if self.obj_mass <= 0:
            raise InvalidInputError("object mass must be positive")
        if self.ground_mu < 0 or self.contact_mu < 0:
            raise InvalidInputError("friction coefficients must be non-negative")

    def to_array(self) -> np.ndarray:
        p = np.zeros(L.N_PARAMS)
        p[L.P_G] = self.g
        p[L.P_BASE_ACC] = self.base_acc
        p[L.P_YAW_ACC] = self.yaw_acc
        p[L.P_HEIGHT_ACC] = self.height_acc
        p[L.P_TILT_ACC] = self.tilt_acc
        p[L.P_ARM_ACC] = self.arm_acc
        p[L.P_GRIP_RATE] = self.grip_rate
        p[L.P_BASE_DRAG] = self.base_drag
        p[L.P_YAW_DRAG] = self.yaw_drag
        p[L.P_HEIGHT_DAMP] = self.height_damp
        p[L.P_NOM_HEIGHT] = self.nom_height
        p[L.P_FALL_TILT] = self.fall_tilt
        p[L.P_ARM_DAMP] = self.arm_damp
        p[L.P_ARM_LIMIT] = self.arm_limit
        p[L.P_HEIGHT_MIN] = self.height_min
        p[L.P_HEIGHT_MAX] = self.height_max
        p[L.P_GRIP_MIN] = self.grip_min
        p[L.P_GRIP_MAX] = self.grip_max
        p[L.P_SHOULDER_X] = self.shoulder_x
        p[L.P_L1] = self.l1
        p[L.P_L2] = self.l2
        p[L.P_SHOULDER_Z] = self.shoulder_z
        p[L.P_EFF_Z] = self.eff_z
        p[L.P_BASE_RADIUS] = self.base_radius
        p[L.P_EFF_RADIUS] = self.eff_radius
        p[L.P_CONTACT_K] = self.contact_k
        p[L.P_CONTACT_B] = self.contact_b
        p[L.P_CONTACT_MU] = self.contact_mu
        p[L.P_TANGENT_B] = self.tangent_b
        p[L.P_OBJ_MASS] = self.obj_mass
        p[L.P_OBJ_RADIUS] = self.obj_radius
        p[L.P_GROUND_MU] = self.ground_mu
        p[L.P_PIVOT_X] = self.pivot_x
        p[L.P_PIVOT_Y] = self.pivot_y
        p[L.P_PLATE_LEN] = self.plate_len
        p[L.P_PLATE_WIDTH] = self.plate_width
        p[L.P_PLATE_RADIUS] = self.plate_radius
        p[L.P_BALANCE] = self.balance_angle
        p[L.P_HINGE_DAMP] = self.hinge_damp
        return p

    @classmethod
    def from_dict(cls, data: dict) -> WorldParams:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown world parameters: {sorted(unknown)}")
        return cls(**data)

    def as_dict(self) -> dict:
        return asdict(self)


def _robot_vector(base_pose, arm, height, gripper) -> np.ndarray:
    x = np.zeros(L.ROBOT_DIM)
    x[L.X:L.YAW + 1] = base_pose
    x[L.HEIGHT] = height
    x[L.ARM_Q:L.ARM_Q + 6] = arm
    x[L.GRIP] = gripper
    return x


def _body_axes(yaw, pitch, roll) -> dict:
    """Columns of Rz(yaw) Ry(pitch) Rx(roll) as robot_x/y/z."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    x = np.stack([cy * cp, sy * cp, -sp], axis=-1)
    y = np.stack([cy * sp * sr - sy * cr, sy * sp * sr + cy * cr, cp * sr], axis=-1)
    z = np.stack([cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr], axis=-1)
    return {"robot_x": x, "robot_y": y, "robot_z": z}


def _row0(v):
    v = np.asarray(v)
    return v[0] if v.ndim >= 1 and v.shape[0] == 1 else v


def _first_row(table: dict) -> dict:
    """Drop the leading batch axis of a one-row table, without forcing lazy entries."""
    if not isinstance(table, LazyTable):
        return {k: _row0(v) for k, v in table.items()}
    names = set(dict.keys(table)) | set(table.factories)
    return LazyTable(factories={k: (lambda k=k: _row0(table[k])) for k in names})


def pad_controls(controls: np.ndarray) -> np.ndarray:
    """(..., T, 19) controls to (..., T+1, 19) rows, zero for the initial state."""
    pad = np.zeros(controls.shape[:-2] + (1, controls.shape[-1]))
    return np.concatenate([pad, controls], axis=-2)


def pad_gripper(commands: np.ndarray) -> np.ndarray:
    """(..., T, 25) commands to (..., T+1) gripper commands, repeating the first for row 0."""
    g = commands[..., 9]
    return np.concatenate([g[..., :1], g], axis=-1)


class World:
    """Common plumbing for the two desk worlds."""

    kind: str = ""
    code: int = -1
    dim: int = 0

    def __init__(self, params: WorldParams | None = None, goal=(0.0, 0.0)):
        self.params = params if params is not None else WorldParams()
        self.param_array = self.params.to_array()
        self.goal = np.asarray(goal, dtype=float)

    @property
    def dt(self) -> float:
        return self.params.dt

    def with_params(self, **changes) -> World:
        return type(self)(replace(self.params, **changes), self.goal)

    def with_goal(self, goal) -> World:
        return type(self)(self.params, goal)

    def step(self, state: WorldState, controls, dt: float | None = None) -> WorldState:
        dt = self.dt if dt is None else float(dt)
        if not 0 < dt <= 0.02 + 1e-12:
            raise InvalidInputError("world step needs 0 < dt <= 0.02 s")
        u = np.asarray(controls, dtype=float)
        if u.shape != (L.CONTROL_DIM,):
            raise InvalidInputError(f"controls must have dimension {L.CONTROL_DIM}")
        x = K.world_step_kernel(self.code, state.vector.copy(), np.clip(u, -1.0, 1.0), self.param_array, dt,
                                self.params.substeps, K.LEG_MIX)
        return WorldState(self.kind, x)

    def robot(self, state: WorldState) -> RobotState:
        v = state.vector
        return RobotState(
            base_pose=v[L.X:L.YAW + 1].copy(),
            base_vel=v[L.VX:L.WZ + 1].copy(),
            arm_joints=v[L.ARM_Q:L.ARM_Q + 6].copy(),
            arm_vel=v[L.ARM_QD:L.ARM_QD + 6].copy(),
            effector_pos=self.effector(v),
            gripper_pos=float(v[L.GRIP]),
            torso_tilt=v[L.PITCH:L.ROLL + 1].copy(),
            torso_height=float(v[L.HEIGHT]),
            fallen=bool(v[L.FALLEN] > 0.5),
            torso_rates=(float(v[L.PITCH_RATE]), float(v[L.ROLL_RATE])),
            height_rate=float(v[L.HEIGHT_RATE]),
        )

    def effector(self, vector) -> np.ndarray:
        raise NotImplementedError

    def effectors(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _robot_sites(self, s: np.ndarray, control_rows, grip_cmd_rows) -> SiteFrame:
        # entries are computed on first use; cost terms touch only a few of them
        n = len(s)
        yaw = s[:, L.YAW]

        def torso():
            return np.stack([s[:, L.X], s[:, L.Y], s[:, L.HEIGHT]], axis=-1)

        def eff():
            return self.effectors(s)

        def foot(fx, fy):
            c, sn = np.cos(yaw), np.sin(yaw)
            return np.stack([s[:, L.X] + c * fx - sn * fy, s[:, L.Y] + sn * fx + c * fy, np.zeros(n)], axis=-1)

        def gripper_axes():
            gyaw = yaw + s[:, L.ARM_Q] + s[:, L.ARM_Q + 1]
            zeros = np.zeros(n)
            return {
                "gripper_x": np.stack([np.cos(gyaw), np.sin(gyaw), zeros], axis=-1),
                "gripper_y": np.stack([-np.sin(gyaw), np.cos(gyaw), zeros], axis=-1),
                "gripper_z": np.stack([zeros, zeros, np.ones(n)], axis=-1),
            }

        def grip_cmd():
            return s[:, L.GRIP] if grip_cmd_rows is None else grip_cmd_rows

        def body_axes():
            return _body_axes(yaw, s[:, L.PITCH], s[:, L.ROLL])

        sites = LazyTable(factories={
            "gripper": eff, "left_palm": eff, "right_palm": eff, "torso": torso, "pelvis": torso,
            **{name: (lambda o=off: foot(*o)) for name, off in FOOT_OFFSETS.items()},
        })
        axes = LazyTable(factories={
            "robot_x": body_axes, "robot_y": body_axes, "robot_z": body_axes,
            "gripper_x": gripper_axes, "gripper_y": gripper_axes, "gripper_z": gripper_axes,
        })
        scalars = LazyTable({
            "torso_height": s[:, L.HEIGHT],
            "torso_pitch": s[:, L.PITCH],
            "torso_roll": s[:, L.ROLL],
            "fallen": s[:, L.FALLEN],
            "gripper_pos": s[:, L.GRIP],
        }, {
            "gripper_cmd": grip_cmd,
            "gripper_close": lambda: np.full(n, self.params.grip_max),
        })
        vectors = LazyTable({"arm_q": s[:, L.ARM_Q:L.ARM_Q + 6]}, {
            "base_vel": lambda: np.stack([s[:, L.VX], s[:, L.VY], s[:, L.WZ]], axis=-1),
            "arm_q_default": lambda: np.broadcast_to(np.asarray(READY_ARM), (n, 6)),
        })
        if control_rows is not None:
            vectors["controls"] = control_rows
        return SiteFrame(sites=sites, axes=axes, vectors=vectors, quats=LazyTable(), scalars=scalars)

    def site_frame(self, states, controls=None, commands=None) -> SiteFrame:
        """Site frame for a (T+1, n) trajectory, or a single state vector.

        ``controls[t]`` and ``commands[t]`` drive state t to t+1, so row t+1 of the
        frame carries them and row 0 gets zero controls and the first command.
        """
        s = np.asarray(states.vector if isinstance(states, WorldState) else states, dtype=float)
        single = s.ndim == 1
        if single:
            s = s[None, :]
            rows_u = None if controls is None else np.asarray(controls, dtype=float).reshape(1, -1)
            rows_g = None if commands is None else np.asarray(commands, dtype=float).reshape(-1)[9:10]
        else:
            rows_u = None if controls is None else pad_controls(np.asarray(controls, dtype=float))
            rows_g = None if commands is None else pad_gripper(np.asarray(commands, dtype=float))
        frame = self.row_frame(s, rows_u, rows_g)
        if single:
            frame = SiteFrame(*(_first_row(t) for t in (frame.sites, frame.axes, frame.vectors, frame.quats,
                                                       frame.scalars)))
        return frame

    def row_frame(self, rows: np.ndarray, control_rows=None, grip_cmd_rows=None) -> SiteFrame:
        """Frame over independent state rows with per-row controls and gripper commands."""
        frame = self._robot_sites(rows, control_rows, grip_cmd_rows)
        self._object_sites(rows, frame)
        return frame

    def _object_sites(self, s: np.ndarray, frame: SiteFrame) -> None:
        raise NotImplementedError


class PushWorld(World):
    """Planar pushing of a disk-shaped object with Coulomb ground friction."""

    kind = "push"
    code = L.PUSH
    dim = L.PUSH_DIM

    def initial_state(self, robot_pose=(0.0, 0.0, 0.0), object_pose=(1.0, 0.0, 0.0), arm=READY_ARM,
                      object_vel=(0.0, 0.0, 0.0)) -> WorldState:
        x = np.zeros(self.dim)
        x[:L.ROBOT_DIM] = _robot_vector(robot_pose, arm, self.params.nom_height, self.params.grip_max)
        x[L.OX:L.OYAW + 1] = object_pose
        x[L.OVX:L.OWZ + 1] = object_vel
        return WorldState(self.kind, x)

    def effector(self, vector) -> np.ndarray:
        pos, _ = K.effector_push(np.asarray(vector, dtype=float), self.param_array)
        return pos

    def effectors(self, s: np.ndarray) -> np.ndarray:
        p = self.params
        yaw = s[:, L.YAW]
        q0 = s[:, L.ARM_Q]
        q01 = q0 + s[:, L.ARM_Q + 1]
        lx = p.shoulder_x + p.l1 * np.cos(q0) + p.l2 * np.cos(q01)
        ly = p.l1 * np.sin(q0) + p.l2 * np.sin(q01)
        c, sn = np.cos(yaw), np.sin(yaw)
        return np.stack([s[:, L.X] + c * lx - sn * ly, s[:, L.Y] + sn * lx + c * ly, np.full_like(yaw, p.eff_z)], axis=-1)

    def obj(self, state: WorldState) -> ObjectState:
        v = state.vector
        return ObjectState(
            pose=v[L.OX:L.OYAW + 1].copy(),
            lin_vel=v[L.OVX:L.OVY + 1].copy(),
            orientation_quat=yaw_quat(v[L.OYAW]),
            mass=self.params.obj_mass,
            friction_coeff=self.params.ground_mu,
        )

    def object_position(self, state: WorldState) -> np.ndarray:
        return state.vector[L.OX:L.OY + 1].copy()

    def object_speed(self, state: WorldState) -> float:
        return float(np.hypot(state.vector[L.OVX], state.vector[L.OVY]))

    def _object_sites(self, s: np.ndarray, frame: SiteFrame) -> None:
        n = len(s)
        half = 0.5 * self.params.obj_height
        oyaw = s[:, L.OYAW]

        def axes():
            c, sn = np.cos(oyaw), np.sin(oyaw)
            zeros = np.zeros(n)
            return {
                "object_x": np.stack([c, sn, zeros], axis=-1),
                "object_y": np.stack([-sn, c, zeros], axis=-1),
                "object_z": np.stack([zeros, zeros, np.ones(n)], axis=-1),
            }

        frame.sites.factories["object"] = lambda: np.stack([s[:, L.OX], s[:, L.OY], np.full(n, half)], axis=-1)
        frame.sites.factories["goal"] = lambda: np.broadcast_to(np.array([self.goal[0], self.goal[1], half]), (n, 3))
        for name in ("object_x", "object_y", "object_z"):
            frame.axes.factories[name] = axes
        frame.vectors.factories["object_vel"] = lambda: np.stack([s[:, L.OVX], s[:, L.OVY], np.zeros(n)], axis=-1)
        frame.vectors.factories["object_angvel"] = lambda: np.stack([np.zeros(n), np.zeros(n), s[:, L.OWZ]], axis=-1)
        frame.quats.factories["object"] = lambda: yaw_quat(oyaw)
        frame.quats.factories["upright"] = lambda: np.broadcast_to(np.array([1.0, 0.0, 0.0, 0.0]), (n, 4))
        frame.scalars.factories["object_tilt"] = lambda: np.zeros(n)


class HingeWorld(World):
    """A plate pivoting about a ground edge, lying at theta=0 and upright at pi/2.

    Gravity pulls the plate flat below the balance angle and upright above it.
    The plate's body frame has z along the plate (pivot to free edge), y along
    the hinge and x normal to the face; ``orientation_quat`` is the rotation by
    theta about the hinge relative to the lying pose.
    """

    kind = "hinge"
    code = L.HINGE
    dim = L.HINGE_DIM

    def initial_state(self, robot_pose=(0.0, 0.0, 0.0), theta=0.0, arm=READY_ARM, omega=0.0) -> WorldState:
        x = np.zeros(self.dim)
        x[:L.ROBOT_DIM] = _robot_vector(robot_pose, arm, self.params.nom_height, self.params.grip_max)
        x[L.THETA] = theta
        x[L.OMEGA] = omega
        return WorldState(self.kind, x)

    def effector(self, vector) -> np.ndarray:
        pos, _ = K.effector_hinge(np.asarray(vector, dtype=float), self.param_array)
        return pos

    def effectors(self, s: np.ndarray) -> np.ndarray:
        p = self.params
        yaw = s[:, L.YAW]
        q0 = s[:, L.ARM_Q]
        q01 = q0 + s[:, L.ARM_Q + 1]
        reach = p.shoulder_x + p.l1 * np.cos(q0) + p.l2 * np.cos(q01)
        lift = p.l1 * np.sin(q0) + p.l2 * np.sin(q01)
        return np.stack([s[:, L.X] + np.cos(yaw) * reach, s[:, L.Y] + np.sin(yaw) * reach,
                         s[:, L.HEIGHT] + p.shoulder_z + lift], axis=-1)

    def obj(self, state: WorldState) -> ObjectState:
        v = state.vector
        return ObjectState(
            pose=v[L.THETA:L.THETA + 1].copy(),
            lin_vel=v[L.OMEGA:L.OMEGA + 1].copy(),
            orientation_quat=pitch_quat(v[L.THETA]),
            mass=self.params.obj_mass,
            friction_coeff=self.params.contact_mu,
        )

    def upright_quat(self) -> np.ndarray:
        return pitch_quat(0.5 * math.pi)

    def _object_sites(self, s: np.ndarray, frame: SiteFrame) -> None:
        p = self.params
        n = len(s)
        th = s[:, L.THETA]
        w = s[:, L.OMEGA]
        half = 0.5 * p.plate_len

        def axes():
            c, sn = np.cos(th), np.sin(th)
            zeros = np.zeros(n)
            return {
                "object_x": np.stack([sn, zeros, c], axis=-1),
                "object_y": np.stack([zeros, np.ones(n), zeros], axis=-1),
                "object_z": np.stack([-c, zeros, sn], axis=-1),
            }

        def center():
            return np.stack([p.pivot_x - half * np.cos(th), np.full(n, p.pivot_y), p.plate_radius + half * np.sin(th)],
                            axis=-1)

        frame.sites.factories["object"] = center
        frame.sites.factories["goal"] = lambda: np.broadcast_to(
            np.array([p.pivot_x, p.pivot_y, p.plate_radius + half]), (n, 3))
        for name in ("object_x", "object_y", "object_z"):
            frame.axes.factories[name] = axes
        frame.vectors.factories["object_vel"] = lambda: np.stack(
            [half * w * np.sin(th), np.zeros(n), half * w * np.cos(th)], axis=-1)
        frame.vectors.factories["object_angvel"] = lambda: np.stack([np.zeros(n), w, np.zeros(n)], axis=-1)
        frame.quats.factories["object"] = lambda: pitch_quat(th)
        frame.quats.factories["upright"] = lambda: np.broadcast_to(self.upright_quat(), (n, 4))
        frame.scalars.factories["object_tilt"] = lambda: 0.5 * math.pi - th


def push_world_step(world: PushWorld, state: WorldState, controls, dt: float) -> WorldState:
    return world.step(state, controls, dt)


def hinge_world_step(world: HingeWorld, state: WorldState, controls, dt: float) -> WorldState:
    return world.step(state, controls, dt)


WORLDS = {"push": PushWorld, "hinge": HingeWorld}


def make_world(kind: str, params: WorldParams | None = None, goal=(0.0, 0.0)) -> World:
    try:
        return WORLDS[kind](params, goal)
    except KeyError:
        raise InvalidInputError(f"unknown world {kind!r}; expected one of {sorted(WORLDS)}") from None
