"""Cost-term vocabulary.

Each term is ``weight * value`` where ``value`` follows the term kind. Every
kind broadcasts over leading batch dimensions of the frame entries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from .frame import SiteFrame

KINDS = (
    "goal_distance", "goal_distance_xy", "site_distance", "min_site_distance",
    "capped_negated_proximity", "quat_distance", "axis_dot_penalty", "exp_axis_alignment",
    "exp_abs_component", "velocity_penalty", "angvel_penalty", "control_penalty",
    "grasp_bonus", "safety_penalty",
)

_COMPONENTS = {None: slice(None), "xyz": slice(None), "xy": slice(0, 2), "z": slice(2, 3)}
_AXIS_FORMS = ("one_minus", "abs_one_minus", "one_minus_abs", "neg")

_REQUIRED = {
    "site_distance": ("a", "b"),
    "min_site_distance": ("pairs",),
    "capped_negated_proximity": ("a", "b"),
    "axis_dot_penalty": ("pairs",),
    "exp_axis_alignment": ("a", "b", "alpha"),
    "exp_abs_component": ("axis", "component", "sigma"),
    "velocity_penalty": ("names",),
    "angvel_penalty": ("names",),
}


@dataclass(frozen=True)
class CostTerm:
    kind: str
    weight: float
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown cost term kind {self.kind!r}")
        if not np.isfinite(self.weight):
            raise InvalidInputError(f"weight of {self.kind} must be finite")
        missing = [p for p in _REQUIRED.get(self.kind, ()) if p not in self.params]
        if missing:
            raise InvalidInputError(f"{self.kind} term is missing parameters {missing}")
        if self.kind == "axis_dot_penalty":
            for pair in self.params["pairs"]:
                if len(pair) != 3 or pair[2] not in _AXIS_FORMS:
                    raise InvalidInputError(f"axis_dot_penalty pairs need (a, b, form) with form in {_AXIS_FORMS}")

    def scaled(self, factor: float) -> CostTerm:
        return CostTerm(self.kind, self.weight * factor, self.params, self.label)

    def describe(self) -> str:
        details = ", ".join(f"{k}={v}" for k, v in self.params.items())
        name = self.label or self.kind
        return f"{name:<12} {self.kind:<26} w={self.weight:g}  {details}"


def _norm(v):
    return np.sqrt(np.sum(np.square(v), axis=-1))


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _distance(frame: SiteFrame, a: str, b: str, components=None, squared=False):
    sl = _COMPONENTS[components]
    d = frame.site(a)[..., sl] - frame.site(b)[..., sl]
    sq = np.sum(np.square(d), axis=-1)
    return sq if squared else np.sqrt(sq)


def quat_distance(q, q_target):
    """Sign-invariant quaternion distance ``min(|q - qt|, |q + qt|)``."""
    return np.minimum(_norm(q - q_target), _norm(q + q_target))


def normalize_quat(q):
    q = np.asarray(q, dtype=float)
    n = _norm(q)
    was_unit = np.all(np.abs(n - 1.0) <= 1e-9)
    return q / n[..., None], not was_unit


def axis_form(dot, form: str):
    if form == "one_minus":
        return 1.0 - dot
    if form == "abs_one_minus":
        return np.abs(1.0 - dot)
    if form == "one_minus_abs":
        return 1.0 - np.abs(dot)
    return -dot


def _controls(frame: SiteFrame, controls):
    if controls is not None:
        return np.asarray(controls, dtype=float)
    return frame.vectors.get("controls", np.zeros(1))


def term_value(term: CostTerm, frame: SiteFrame, controls=None):
    """Unweighted value of a term."""
    p = term.params
    kind = term.kind
    if kind in ("goal_distance", "goal_distance_xy"):
        comp = "xy" if kind == "goal_distance_xy" else p.get("components")
        return _distance(frame, p.get("site", "object"), p.get("goal", "goal"), comp, p.get("squared", False))
    if kind == "site_distance":
        return _distance(frame, p["a"], p["b"], p.get("components"), p.get("squared", False))
    if kind == "min_site_distance":
        dists = [_distance(frame, a, b, p.get("components")) for a, b in p["pairs"]]
        return np.minimum.reduce(np.broadcast_arrays(*dists)) if len(dists) > 1 else dists[0]
    if kind == "capped_negated_proximity":
        return -np.minimum(p.get("d_thresh", np.inf), _distance(frame, p["a"], p["b"], p.get("components")))
    if kind == "quat_distance":
        return quat_distance(frame.quat(p.get("quat", "object")), frame.quat(p.get("target", "upright")))
    if kind == "axis_dot_penalty":
        total = 0.0
        for a, b, form in p["pairs"]:
            total = total + axis_form(_dot(frame.axis(a), frame.axis(b)), form)
        return total
    if kind == "exp_axis_alignment":
        return 1.0 - np.exp(p["alpha"] * (_dot(frame.axis(p["a"]), frame.axis(p["b"])) - 1.0))
    if kind == "exp_abs_component":
        return np.exp(np.abs(frame.axis(p["axis"])[..., p["component"]]) / p["sigma"])
    if kind in ("velocity_penalty", "angvel_penalty"):
        total = 0.0
        for name in p["names"]:
            v = frame.vector(name)
            total = total + (np.sum(np.square(v), axis=-1) if p.get("squared", False) else _norm(v))
        return total
    if kind == "control_penalty":
        if p.get("mode", "u_norm") == "base_arm":
            return _norm(frame.vector("base_vel")) + _norm(frame.vector("arm_q") - frame.vector("arm_q_default"))
        return _norm(_controls(frame, controls))
    if kind == "grasp_bonus":
        cmd = frame.scalar("gripper_cmd")
        closing = np.abs(cmd - frame.scalar("gripper_close")) <= 1e-6
        resisted = np.abs(cmd - frame.scalar("gripper_pos")) > p.get("resistance", 0.1)
        # a closed gripper that cannot reach its command is holding something
        return np.where(closing & resisted, -p.get("bonus", 1.0),
                        np.where(closing, p.get("empty_penalty", 1.0), 0.0))
    if kind == "safety_penalty":
        tilt_max = p.get("tilt_max", 0.5)
        unsafe = (
            (frame.scalar("fallen") > 0.5)
            | (frame.scalar("torso_height") < p.get("height_min", 0.32))
            | (np.abs(frame.scalar("torso_roll")) > tilt_max)
            | (np.abs(frame.scalar("torso_pitch")) > tilt_max)
        )
        if "object_tilt_max" in p:
            unsafe = unsafe | (np.abs(frame.scalar("object_tilt")) > p["object_tilt_max"])
        return unsafe.astype(float)
    raise InvalidInputError(f"unknown cost term kind {kind!r}")


def eval_term(term: CostTerm, frame: SiteFrame, controls=None):
    value = term.weight * term_value(term, frame, controls)
    return float(value) if np.ndim(value) == 0 else value


def warn_if_not_unit(q) -> np.ndarray:
    q, renormalized = normalize_quat(q)
    if renormalized:
        warnings.warn("non-unit quaternion was normalized", RuntimeWarning, stacklevel=3)
    return q
