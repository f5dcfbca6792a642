"""Knot-parameterized action plans and the linear noise schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, StructuralError

INTERPOLATIONS = ("linear", "zoh")


@dataclass(frozen=True)
class SplinePlan:
    """K knot actions over ``[0, horizon]``.

    Evaluation past the horizon holds the last knot.
    """

    knot_times: np.ndarray
    knots: np.ndarray
    horizon: float
    interpolation: str = "linear"

    def __post_init__(self):
        times = np.array(self.knot_times, dtype=float).reshape(-1)
        knots = np.array(self.knots, dtype=float)
        if knots.ndim == 1:
            knots = knots[:, None]
        if times.size == 0 or knots.size == 0:
            raise StructuralError("plan has no knots")
        if times.size < 2 or knots.shape[0] != times.size:
            raise StructuralError(f"need K >= 2 knots matching K times, got {knots.shape[0]} knots, {times.size} times")
        if np.any(np.diff(times) <= 0):
            raise StructuralError("knot times must be strictly increasing")
        horizon = float(self.horizon)
        if times[0] != 0.0 or times[-1] != horizon:
            raise StructuralError("knot times must span exactly [0, horizon]")
        if self.interpolation not in INTERPOLATIONS:
            raise StructuralError(f"unknown interpolation {self.interpolation!r}")
        times.flags.writeable = False
        knots.flags.writeable = False
        object.__setattr__(self, "knot_times", times)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "horizon", horizon)

    @classmethod
    def uniform(cls, knots, horizon: float, interpolation: str = "linear") -> SplinePlan:
        knots = np.asarray(knots, dtype=float)
        return cls(np.linspace(0.0, horizon, knots.shape[0]), knots, horizon, interpolation)

    @classmethod
    def constant(cls, action, num_knots: int, horizon: float, interpolation: str = "linear") -> SplinePlan:
        action = np.asarray(action, dtype=float).reshape(-1)
        return cls.uniform(np.tile(action, (num_knots, 1)), horizon, interpolation)

    @property
    def num_knots(self) -> int:
        return self.knots.shape[0]

    @property
    def dim(self) -> int:
        return self.knots.shape[1]

    def with_knots(self, knots) -> SplinePlan:
        """Same knot grid, new knot values (shape must match)."""
        knots = np.array(knots, dtype=float)
        if knots.ndim == 1:
            knots = knots[:, None]
        if knots.shape[0] != self.knot_times.size:
            raise StructuralError(f"need {self.knot_times.size} knots, got {knots.shape[0]}")
        # the grid is already validated, so skip __post_init__
        plan = object.__new__(SplinePlan)
        knots.flags.writeable = False
        object.__setattr__(plan, "knot_times", self.knot_times)
        object.__setattr__(plan, "knots", knots)
        object.__setattr__(plan, "horizon", self.horizon)
        object.__setattr__(plan, "interpolation", self.interpolation)
        return plan


def evaluate_many(plan: SplinePlan, times) -> np.ndarray:
    """Evaluate the plan at an array of times; returns shape (len(times), dim)."""
    t = np.asarray(times, dtype=float).reshape(-1)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise InvalidInputError("evaluation times must be finite and non-negative")
    kt, kn = plan.knot_times, plan.knots
    last = kn.shape[0] - 1
    # side="right" makes a time equal to a knot select the segment starting there
    idx = np.searchsorted(kt, t, side="right") - 1
    idx = np.clip(idx, 0, last)
    out = kn[idx].copy()
    if plan.interpolation == "linear":
        inner = idx < last
        i = idx[inner]
        w = (t[inner] - kt[i]) / (kt[i + 1] - kt[i])
        out[inner] = kn[i] + w[:, None] * (kn[i + 1] - kn[i])
    return out


def evaluate_stack(plans, times) -> np.ndarray:
    """Evaluate plans sharing one knot grid at the same times; shape (P, len(times), dim).

    Row p equals ``evaluate_many(plans[p], times)`` exactly.
    """
    plans = list(plans)
    if not plans:
        raise StructuralError("no plans to evaluate")
    first = plans[0]
    for p in plans[1:]:
        if p.interpolation != first.interpolation or not np.array_equal(p.knot_times, first.knot_times):
            raise StructuralError("stacked plans must share knot times and interpolation")
    t = np.asarray(times, dtype=float).reshape(-1)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise InvalidInputError("evaluation times must be finite and non-negative")
    kt = first.knot_times
    kn = np.stack([p.knots for p in plans])
    last = kn.shape[1] - 1
    idx = np.clip(np.searchsorted(kt, t, side="right") - 1, 0, last)
    out = kn[:, idx].copy()
    if first.interpolation == "linear":
        inner = idx < last
        i = idx[inner]
        w = (t[inner] - kt[i]) / (kt[i + 1] - kt[i])
        out[:, inner] = kn[:, i] + w[None, :, None] * (kn[:, i + 1] - kn[:, i])
    return out


def evaluate_plan(plan: SplinePlan, t: float) -> np.ndarray:
    return evaluate_many(plan, [t])[0]


def shift_plan(plan: SplinePlan, dt: float) -> SplinePlan:
    """Advance the plan by ``dt`` and resample it on the original knot grid."""
    if dt < 0:
        raise InvalidInputError("shift must be non-negative")
    return plan.with_knots(evaluate_many(plan, plan.knot_times + dt))


@dataclass(frozen=True)
class NoiseSchedule:
    """Sampling std ramping linearly from ``std_lo`` at t=0 to ``std_hi`` at the horizon."""

    std_lo: float = 0.02
    std_hi: float = 0.6
    horizon: float = 1.5

    def __post_init__(self):
        if not 0 <= self.std_lo <= self.std_hi:
            raise InvalidInputError("noise schedule needs 0 <= std_lo <= std_hi")
        if self.horizon <= 0:
            raise InvalidInputError("noise schedule horizon must be positive")


def noise_std_at(schedule: NoiseSchedule, t) -> np.ndarray | float:
    t = np.clip(np.asarray(t, dtype=float), 0.0, schedule.horizon)
    w = t / schedule.horizon
    std = np.minimum(schedule.std_lo + w * (schedule.std_hi - schedule.std_lo), schedule.std_hi)
    # rounding in lo + (hi - lo) can miss hi by an ulp
    std = np.where(w >= 1.0, schedule.std_hi, std)
    return float(std) if std.ndim == 0 else std
