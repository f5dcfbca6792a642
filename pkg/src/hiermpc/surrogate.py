"""A cheap quadratic stand-in for the rollout engine, for optimizer checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spline import SplinePlan, evaluate_many


@dataclass(frozen=True)
class SurrogateResult:
    total_cost: float
    failed: bool = False


class QuadraticSurrogate:
    """Cost is the squared norm of ``start + integral of the plan's action``.

    The integral uses the same 0.02 s control grid as real rollouts, so the
    optimum (cost 0) is any plan whose integrated action cancels ``start``.
    """

    def __init__(self, start=(1.0, -0.5), dt: float = 0.02, horizon: float = 1.5):
        self.start = np.asarray(start, dtype=float)
        self.dt = dt
        self.steps = int(np.floor(horizon / dt + 1e-9))
        self.bounds = None

    def cost(self, plan: SplinePlan) -> float:
        a = evaluate_many(plan, np.arange(self.steps) * self.dt)
        end = self.start + a.sum(axis=0) * self.dt
        return float(end @ end)

    def run(self, state, plans) -> list[SurrogateResult]:
        return [SurrogateResult(self.cost(p)) for p in plans]
