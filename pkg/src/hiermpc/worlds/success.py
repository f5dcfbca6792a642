"""Task success detection for Move and Upright tasks."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from . import layout as L
from .state import WorldState


class Outcome(str, enum.Enum):
    SUCCESS = "Success"
    RUNNING = "Running"
    TIMEOUT = "Timeout"
    FAILURE = "Failure"


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    kind: str = "move"  # "move" or "upright"
    goal_pos: tuple = (0.0, 0.0)
    pos_tol: float = 0.1
    vel_tol: float = 0.05
    orient_tol: float = 0.1
    angvel_tol: float = 0.05
    time_limit: float = 30.0

    def __post_init__(self):
        if self.kind not in ("move", "upright"):
            raise InvalidInputError(f"task kind must be 'move' or 'upright', got {self.kind!r}")
        if min(self.pos_tol, self.vel_tol, self.orient_tol, self.angvel_tol, self.time_limit) <= 0:
            raise InvalidInputError("tolerances and time limit must be positive")


def success_predicate(spec: TaskSpec, distance: float, speed: float) -> bool:
    """``distance``/``speed`` are position error and speed (Move) or angle error and rate (Upright)."""
    if spec.kind == "move":
        return distance < spec.pos_tol and speed < spec.vel_tol
    return distance < spec.orient_tol and speed < spec.angvel_tol


def task_errors(state: WorldState, spec: TaskSpec) -> tuple[float, float]:
    v = state.vector
    if spec.kind == "move":
        if state.kind != "push":
            raise InvalidInputError("Move tasks need the push world")
        dist = math.hypot(v[L.OX] - spec.goal_pos[0], v[L.OY] - spec.goal_pos[1])
        return dist, math.hypot(v[L.OVX], v[L.OVY])
    if state.kind != "hinge":
        raise InvalidInputError("Upright tasks need the hinge world")
    return abs(0.5 * math.pi - v[L.THETA]), abs(v[L.OMEGA])


def check_success(state: WorldState, spec: TaskSpec, elapsed: float) -> Outcome:
    dist, speed = task_errors(state, spec)
    if success_predicate(spec, dist, speed):
        return Outcome.SUCCESS
    if elapsed > spec.time_limit:
        return Outcome.TIMEOUT
    return Outcome.RUNNING
