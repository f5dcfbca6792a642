"""Task cost assemblies.

Each task id maps to a builder that turns a weights table and a constants table
into a ``TaskCost``. Default weights and constants live in the packaged per-task
config files; they are not given numerically anywhere upstream and were picked
for the desk worlds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, StructuralError
from .frame import SiteFrame
from .terms import CostTerm, eval_term, quat_distance, warn_if_not_unit


@dataclass(frozen=True)
class DerivedSite:
    """A site (or axis) recomputed from the frame on every evaluation.

    Rules:
      offset         anchor + offset (world frame)
      object_offset  anchor + offset expressed in the object_x/y/z axes
      behind         anchor - standoff * unit_xy(target - anchor)
      approach       anchor + standoff * unit_xy(source - anchor)
      with_z         anchor with z replaced by ``z``
      direction      unit(target - anchor), stored as an axis
    """

    name: str
    rule: str
    anchor: str
    params: dict = field(default_factory=dict)


def _unit_xy(v):
    d = np.array(v, dtype=float, copy=True)
    d[..., 2] = 0.0
    n = np.sqrt(np.sum(d * d, axis=-1, keepdims=True))
    return d / np.maximum(n, 1e-9)


def resolve_derived(frame: SiteFrame, derived) -> SiteFrame:
    if not derived:
        return frame
    out = frame.copy()
    for d in derived:
        anchor = out.site(d.anchor)
        p = d.params
        if d.rule == "offset":
            value = anchor + np.asarray(p["offset"], dtype=float)
        elif d.rule == "object_offset":
            ox, oy, oz = p["offset"]
            value = anchor + ox * out.axis("object_x") + oy * out.axis("object_y") + oz * out.axis("object_z")
        elif d.rule == "behind":
            value = anchor - p["standoff"] * _unit_xy(out.site(p["target"]) - anchor)
        elif d.rule == "approach":
            value = anchor + p["standoff"] * _unit_xy(out.site(p["source"]) - anchor)
        elif d.rule == "with_z":
            value = np.array(anchor, dtype=float, copy=True)
        elif d.rule == "direction":
            diff = out.site(p["target"]) - anchor
            out.axes[d.name] = diff / np.maximum(np.sqrt(np.sum(diff * diff, axis=-1, keepdims=True)), 1e-9)
            continue
        else:
            raise InvalidInputError(f"unknown derived-site rule {d.rule!r}")
        if "z" in p:
            value = np.array(value, dtype=float, copy=True)
            value[..., 2] = p["z"]
        out.sites[d.name] = value
    return out


@dataclass(frozen=True)
class TaskCost:
    task_id: str
    terms: tuple
    terminal_terms: tuple = ()
    derived: tuple = ()

    def __post_init__(self):
        if not self.terms and not self.terminal_terms:
            raise StructuralError("a task cost needs at least one term")

    def scaled(self, factor: float) -> TaskCost:
        return TaskCost(self.task_id, tuple(t.scaled(factor) for t in self.terms),
                        tuple(t.scaled(factor) for t in self.terminal_terms), self.derived)

    def describe(self) -> list[str]:
        lines = [t.describe() for t in self.terms]
        lines += ["[terminal] " + t.describe() for t in self.terminal_terms]
        return lines


def eval_task_cost(cost: TaskCost, frame: SiteFrame, controls=None, terminal: bool = False):
    """Sum of the running terms, plus the terminal terms when ``terminal`` is set."""
    frame = resolve_derived(frame, cost.derived)
    terms = cost.terms + (cost.terminal_terms if terminal else ())
    total = 0.0
    for term in terms:
        total = total + eval_term(term, frame, controls)
    return float(total) if np.ndim(total) == 0 else total


def j_move(frame: SiteFrame, w_goal=1.0, w_gripper=1.0, w_vel=1.0) -> float:
    d_goal = np.linalg.norm(frame.site("object") - frame.site("goal"), axis=-1)
    d_grip = np.linalg.norm(frame.site("gripper") - frame.site("object"), axis=-1)
    speed = np.linalg.norm(frame.vector("object_vel"), axis=-1)
    return w_goal * d_goal + w_gripper * d_grip + w_vel * speed


def j_upright(frame: SiteFrame, w_upright=1.0, w_gripper=1.0) -> float:
    q = warn_if_not_unit(frame.quat("object"))
    qu = warn_if_not_unit(frame.quat("upright"))
    d_grip = np.linalg.norm(frame.site("gripper") - frame.site("object"), axis=-1)
    return w_upright * quat_distance(q, qu) + w_gripper * d_grip


# --- builders -------------------------------------------------------------

def _t(kind, weight, label, **params) -> CostTerm:
    return CostTerm(kind, float(weight), params, label)


def _safety(w, c) -> CostTerm:
    params = {"height_min": c.get("safety_height_min", 0.32), "tilt_max": c.get("safety_tilt_max", 0.5)}
    if "object_tilt_max" in c:
        params["object_tilt_max"] = c["object_tilt_max"]
    return CostTerm("safety_penalty", float(w["safety"]), params, "safety")


def _move_terms(w):
    return [
        _t("goal_distance", w["goal"], "goal", site="object", goal="goal"),
        _t("site_distance", w["gripper"], "gripper", a="gripper", b="object"),
        _t("velocity_penalty", w["vel"], "vel", names=["object_vel"]),
    ]


def _build_move(w, c):
    return _move_terms(w), []


def _build_upright(w, c):
    return [
        _t("quat_distance", w["upright"], "upright", quat="object", target="upright"),
        _t("site_distance", w["gripper"], "gripper", a="gripper", b="object"),
    ], []


def _build_e2e(w, c):
    terms = _move_terms(w) + [
        _t("site_distance", w["height"], "height", a="torso", b="torso_nominal", components="z"),
        _t("axis_dot_penalty", w["upright_torso"], "torso_up", pairs=[("robot_z", "world_z", "one_minus")]),
        _t("velocity_penalty", w["base_vel"], "base_vel", names=["base_vel"]),
        _t("control_penalty", w["ctrl"], "ctrl"),
        _safety(w, c),
    ]
    return terms, [DerivedSite("torso_nominal", "with_z", "torso", {"z": c.get("nominal_height", 0.5)})]


def _build_tire_upright(w, c):
    terms = [
        _t("exp_abs_component", w["orient"], "orient", axis="object_y", component=2, sigma=c["sigma"]),
        _t("site_distance", w["gripper"], "gripper", a="gripper", b="gripper_des"),
        _t("min_site_distance", w["foot"], "foot", pairs=[("fr_foot", "fr_des"), ("fl_foot", "fl_des")]),
        _t("site_distance", w["torso"], "torso", a="torso", b="torso_des"),
        _t("control_penalty", w["ctrl"], "ctrl"),
        _safety(w, c),
    ]
    derived = [
        DerivedSite("gripper_des", "offset", "object", {"offset": (0.0, 0.0, c["gripper_lift"])}),
        DerivedSite("fr_des", "approach", "object", {"source": "torso", "standoff": c["foot_standoff"], "z": 0.0}),
        DerivedSite("fl_des", "approach", "object", {"source": "torso", "standoff": c["foot_standoff"], "z": 0.0}),
        DerivedSite("torso_des", "approach", "object", {"source": "torso", "standoff": c["torso_standoff"],
                                                         "z": c.get("nominal_height", 0.5)}),
    ]
    return terms, derived


def _barrier_grasp_terms(w, c):
    return [
        _t("exp_axis_alignment", w["orient"], "orient", a="object_z", b="world_z", alpha=c["alpha"]),
        _t("min_site_distance", w["grasp"], "grasp", pairs=[("gripper", "grasp_L"), ("gripper", "grasp_R")]),
        _t("axis_dot_penalty", w["grip"], "grip_orient",
           pairs=[("gripper_x", "object_x", "one_minus_abs"), ("gripper_y", "object_z", "one_minus_abs")]),
    ]


def _barrier_derived(c):
    half = c["grasp_half_width"]
    up = c["grasp_height"]
    return [
        DerivedSite("grasp_L", "object_offset", "object", {"offset": (0.0, half, up)}),
        DerivedSite("grasp_R", "object_offset", "object", {"offset": (0.0, -half, up)}),
        DerivedSite("approach_L", "object_offset", "object", {"offset": (-c["approach_standoff"], half, 0.0)}),
        DerivedSite("approach_R", "object_offset", "object", {"offset": (-c["approach_standoff"], -half, 0.0)}),
    ]


def _build_barrier_upright(w, c):
    terms = _barrier_grasp_terms(w, c) + [
        _t("min_site_distance", w["approach"], "approach", pairs=[("torso", "approach_L"), ("torso", "approach_R")]),
        _t("velocity_penalty", w["vel"], "vel", names=["object_vel"], squared=True),
        _t("control_penalty", w["ctrl"], "ctrl"),
        _t("grasp_bonus", w["grasp_bonus"], "j_grasp", resistance=c["grasp_resistance"]),
        _safety(w, c),
    ]
    return terms, _barrier_derived(c)


def _build_cone_like(w, c):
    return [
        _t("exp_axis_alignment", w["orient"], "orient", a="object_z", b="world_z", alpha=c["alpha"]),
        _t("site_distance", w["gripper"], "gripper", a="gripper", b="object"),
        _t("capped_negated_proximity", w["torso"], "torso", a="torso", b="object", d_thresh=c["d_thresh"]),
        _t("velocity_penalty", w["vel"], "vel", names=["object_vel"], squared=True),
        _t("control_penalty", w["ctrl"], "ctrl"),
        _safety(w, c),
    ], []


def _build_tire_stack(w, c):
    terms = [
        _t("site_distance", w["xy"], "stack_xy", a="object", b="bottom", components="xy"),
        _t("site_distance", w["z"], "stack_z", a="object", b="stack_target", components="z"),
        _t("axis_dot_penalty", w["orient"], "orient", pairs=[("object_y", "stack_dir", "one_minus")]),
        _t("velocity_penalty", w["bottom"], "bottom_v", names=["bottom_vel"]),
        _t("angvel_penalty", w["bottom"], "bottom_w", names=["bottom_angvel"]),
        _t("site_distance", w["gripper"], "gripper", a="gripper", b="gripper_des"),
        _t("site_distance", w["torso"], "torso", a="torso", b="torso_des"),
        _t("control_penalty", w["ctrl"], "ctrl"),
        _safety(w, c),
    ]
    derived = [
        DerivedSite("stack_target", "offset", "bottom", {"offset": (0.0, 0.0, c["stack_height"])}),
        DerivedSite("stack_dir", "direction", "object", {"target": "bottom"}),
        DerivedSite("gripper_des", "offset", "object", {"offset": (0.0, 0.0, c["gripper_lift"])}),
        DerivedSite("torso_des", "approach", "object", {"source": "torso", "standoff": c["torso_standoff"],
                                                         "z": c.get("nominal_height", 0.5)}),
    ]
    return terms, derived


def _build_barrier_drag(w, c):
    terms = [_t("goal_distance", w["goal"], "goal", site="object", goal="goal")] + _barrier_grasp_terms(w, c) + [
        _t("velocity_penalty", w["vel"], "vel", names=["object_vel"], squared=True),
        _t("control_penalty", w["ctrl"], "ctrl"),
        _t("grasp_bonus", w["grasp_bonus"], "j_grasp", resistance=c["grasp_resistance"]),
        _safety(w, c),
    ]
    return terms, _barrier_derived(c)


def _build_rack_drag(w, c):
    s = c["approach_spacing"]
    back = -c["approach_standoff"]
    terms = [
        _t("goal_distance", w["goal"], "goal", site="object", goal="goal"),
        _t("axis_dot_penalty", w["orient"], "orient", pairs=[
            ("object_x", "world_x", "one_minus"), ("object_y", "world_y", "one_minus"),
            ("object_z", "world_z", "one_minus")]),
        _t("site_distance", w["grasp"], "grasp", a="gripper", b="grasp"),
        _t("axis_dot_penalty", w["grip"], "grip_orient", pairs=[("gripper_z", "object_z", "one_minus")]),
        _t("min_site_distance", w["approach"], "approach", pairs=[
            ("torso", "approach_L"), ("torso", "approach_mid"), ("torso", "approach_R")]),
        _t("grasp_bonus", w["grasp_bonus"], "j_grasp", resistance=c["grasp_resistance"]),
        _safety(w, c),
    ]
    derived = [
        DerivedSite("grasp", "object_offset", "object", {"offset": (back / 2, 0.0, c["grasp_height"])}),
        DerivedSite("approach_L", "object_offset", "object", {"offset": (back, s, 0.0)}),
        DerivedSite("approach_mid", "object_offset", "object", {"offset": (back, 0.0, 0.0)}),
        DerivedSite("approach_R", "object_offset", "object", {"offset": (back, -s, 0.0)}),
    ]
    return terms, derived


def _build_rugged_box(w, c):
    terms = [
        _t("goal_distance", w["goal"], "goal", site="object", goal="goal"),
        _t("axis_dot_penalty", w["orient"], "orient", pairs=[
            ("object_x", "world_x", "abs_one_minus"), ("object_y", "world_y", "abs_one_minus"),
            ("object_z", "world_z", "abs_one_minus")]),
        _t("site_distance", w["torso"], "torso", a="torso", b="torso_des"),
        _t("site_distance", w["gripper"], "gripper", a="gripper", b="object"),
        _t("control_penalty", w["ctrl"], "ctrl"),
        _safety(w, c),
    ]
    derived = [DerivedSite("torso_des", "behind", "object", {"target": "goal", "standoff": c["push_standoff"],
                                                              "z": c.get("nominal_height", 0.5)})]
    return terms, derived


def _g1_tail(w, c):
    return [
        _t("control_penalty", w["ctrl"], "ctrl", mode="base_arm"),
        _safety(w, c),
    ]


def _g1_hands(w, target):
    return _t("min_site_distance", w["hand"], "hand", pairs=[("left_palm", target), ("right_palm", target)])


def _g1_pelvis(w, target):
    return _t("capped_negated_proximity", w["pelvis"], "pelvis", a="pelvis", b=target)


def _build_g1_box(w, c):
    return [
        _t("goal_distance", w["goal"], "goal", site="object", goal="goal"),
        _t("axis_dot_penalty", w["orient"], "orient", pairs=[("object_y", "world_z", "abs_one_minus")]),
        _g1_hands(w, "object"),
        _g1_pelvis(w, "object"),
        _t("axis_dot_penalty", w["facing"], "facing", pairs=[("robot_x", "world_x", "neg")]),
    ] + _g1_tail(w, c), []


def _build_g1_chair(w, c):
    return [
        _t("goal_distance_xy", w["goal"], "goal", site="object", goal="goal"),
        _t("axis_dot_penalty", w["orient"], "orient", pairs=[("object_z", "world_z", "abs_one_minus")]),
        _g1_hands(w, "object"),
        _g1_pelvis(w, "object"),
        _t("velocity_penalty", w["vel"], "vel", names=["object_vel"], squared=True),
    ] + _g1_tail(w, c), []


def _build_g1_door(w, c):
    return [
        _t("site_distance", w["goal"], "goal", a="pelvis", b="goal"),
        _t("site_distance", w["hand"], "hand", a="right_palm", b="handle"),
        _g1_pelvis(w, "door"),
        _t("axis_dot_penalty", w["facing"], "facing", pairs=[("robot_x", "world_x", "neg")]),
    ] + _g1_tail(w, c), []


def _build_g1_table(w, c):
    return [
        _t("goal_distance_xy", w["goal"], "goal", site="object", goal="goal"),
        _t("axis_dot_penalty", w["orient"], "orient", pairs=[("object_y", "world_z", "abs_one_minus")]),
        _g1_hands(w, "object"),
        _g1_pelvis(w, "object"),
        _t("velocity_penalty", w["vel"], "vel", names=["object_vel"], squared=True),
    ] + _g1_tail(w, c), []


BUILDERS = {
    "move_generic": _build_move,
    "upright_generic": _build_upright,
    "e2e_mpc_move": _build_e2e,
    "tire_upright": _build_tire_upright,
    "barrier_upright": _build_barrier_upright,
    "cone_upright": _build_cone_like,
    "chair_upright": _build_cone_like,
    "tire_stack": _build_tire_stack,
    "barrier_drag": _build_barrier_drag,
    "rack_drag": _build_rack_drag,
    "rugged_box_push": _build_rugged_box,
    "g1_box_push": _build_g1_box,
    "g1_chair_push": _build_g1_chair,
    "g1_door_open": _build_g1_door,
    "g1_table_push": _build_g1_table,
}

TASK_IDS = tuple(BUILDERS)


def assemble_task_cost(task_id: str, weights: dict | None = None, config=None,
                       terminal_only: bool = False) -> TaskCost:
    """Build the cost for ``task_id``.

    ``config`` is a ``TaskConfig`` (its weights and constants replace the packaged
    defaults) or a plain mapping of constant overrides. ``weights`` is applied last.
    """
    if task_id not in BUILDERS:
        raise InvalidInputError(f"unknown task id {task_id!r}; valid ids: {', '.join(TASK_IDS)}")
    from ..config import TaskConfig, load_task_config

    defaults = load_task_config(task_id)
    w, c = dict(defaults.weights), dict(defaults.constants)
    if isinstance(config, TaskConfig):
        w.update(config.weights)
        c.update(config.constants)
    elif config:
        c.update(config)
    w.update(weights or {})
    for name, value in w.items():
        if not math.isfinite(value):
            raise InvalidInputError(f"weight {name!r} must be finite")
    terms, derived = BUILDERS[task_id](w, c)
    if terminal_only:
        return TaskCost(task_id, (), tuple(terms), tuple(derived))
    return TaskCost(task_id, tuple(terms), (), tuple(derived))
