"""Cross-Entropy Method over spline knots.

Each iteration perturbs the nominal plan knot by knot, rolls out the population,
keeps the lowest-cost elites and moves the nominal to their mean. The per-knot
noise follows the fixed linear schedule; only the mean is refit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, StructuralError
from .spline import NoiseSchedule, SplinePlan, noise_std_at

WEIGHTINGS = ("uniform", "exponential")


@dataclass(frozen=True)
class CemConfig:
    num_samples: int = 32
    num_elites: int = 3
    noise: NoiseSchedule = field(default_factory=NoiseSchedule)
    include_nominal: bool = True
    seed: int = 0
    weighting: str = "uniform"
    temperature: float = 1.0  # only used by exponential weighting

    def __post_init__(self):
        if not 1 <= self.num_elites <= self.num_samples:
            raise InvalidInputError("need 1 <= num_elites <= num_samples")
        if self.weighting not in WEIGHTINGS:
            raise InvalidInputError(f"weighting must be one of {WEIGHTINGS}")
        if self.temperature <= 0:
            raise InvalidInputError("temperature must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, data: dict) -> CemConfig:
        data = dict(data)
        noise = data.pop("noise", None)
        if isinstance(noise, dict):
            data["noise"] = NoiseSchedule(**noise)
        elif isinstance(noise, (list, tuple)):
            data["noise"] = NoiseSchedule(*noise)
        elif noise is not None:
            data["noise"] = noise
        return cls(**data)


@dataclass(frozen=True)
class PlanCandidate:
    plan: SplinePlan
    cost: float
    sample_index: int
    result: object = None  # the rollout behind the cost, when available

    def __post_init__(self):
        if math.isnan(self.cost) or self.cost == -math.inf:
            raise InvalidInputError("candidate cost must be finite or +inf")


def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(iteration)]))


def sample_population(nominal: SplinePlan, config: CemConfig, iteration: int, bounds=None) -> list[SplinePlan]:
    """``config.num_samples`` perturbed copies of ``nominal``, clamped to ``bounds`` (lower, upper).

    One generator seeded by (seed, iteration) draws standard normals in row-major
    order over (sample, knot, dim), so each noise entry is a pure function of
    (seed, iteration, sample_index, knot_index, dim_index). Sample 0 keeps its
    draws even when it is replaced by the unperturbed nominal.
    """
    std = np.asarray(noise_std_at(config.noise, nominal.knot_times), dtype=float).reshape(1, -1, 1)
    base = np.asarray(nominal.knots)
    noise = iteration_rng(config.seed, iteration).standard_normal((config.num_samples,) + base.shape)
    knots = base[None] + std * noise
    if config.include_nominal:
        knots[0] = base
    if bounds is not None:
        knots = np.clip(knots, np.asarray(bounds[0]), np.asarray(bounds[1]))
    return [nominal.with_knots(k) for k in knots]


def select_elites(candidates, k: int) -> list[PlanCandidate]:
    """The ``k`` cheapest candidates, ties broken by lower sample index."""
    candidates = list(candidates)
    if not candidates:
        raise StructuralError("cannot select elites from an empty population")
    if not 1 <= k <= len(candidates):
        raise InvalidInputError(f"k must be in [1, {len(candidates)}], got {k}")
    return sorted(candidates, key=lambda c: (c.cost, c.sample_index))[:k]


def update_nominal(elites, weighting: str = "uniform", temperature: float = 1.0) -> SplinePlan:
    """Knot-wise mean of the elite plans (exponentially cost-weighted on request)."""
    elites = list(elites)
    if not elites:
        raise StructuralError("need at least one elite")
    first = elites[0].plan
    for e in elites[1:]:
        if e.plan.knots.shape != first.knots.shape or not np.array_equal(e.plan.knot_times, first.knot_times):
            raise StructuralError("elite plans must share knot times and shape")
    stack = np.stack([e.plan.knots for e in elites])
    if weighting == "uniform":
        # deviations from the first elite keep identical elites exact
        mean = first.knots + (stack - first.knots).sum(axis=0) / len(elites)
    elif weighting == "exponential":
        costs = np.array([e.cost for e in elites], dtype=float)
        finite = np.isfinite(costs)
        if not finite.any():
            w = np.full(len(elites), 1.0 / len(elites))
        else:
            z = np.where(finite, -(costs - costs[finite].min()) / temperature, -np.inf)
            w = np.exp(z)
            w /= w.sum()
        mean = np.tensordot(w, stack, axes=1)
    else:
        raise InvalidInputError(f"unknown weighting {weighting!r}")
    return first.with_knots(mean)


def plan_iteration(state, nominal: SplinePlan, engine, config: CemConfig, iteration: int, bounds=None):
    """One CEM step. Returns (updated nominal, best candidate).

    ``engine`` needs ``run(state, plans)`` returning objects with ``total_cost``
    and ``failed``. Failed rollouts score +inf; the step fails only if all do.
    """
    if bounds is None:
        bounds = getattr(engine, "bounds", None)
    plans = sample_population(nominal, config, iteration, bounds)
    results = engine.run(state, plans)
    if len(results) != len(plans):
        raise StructuralError("engine returned a different number of results than plans")
    candidates = [
        PlanCandidate(p, math.inf if r.failed else float(r.total_cost), i, r)
        for i, (p, r) in enumerate(zip(plans, results))
    ]
    if all(math.isinf(c.cost) for c in candidates):
        raise StructuralError("every rollout in the population failed")
    elites = select_elites(candidates, config.num_elites)
    updated = update_nominal([e for e in elites if math.isfinite(e.cost)], config.weighting, config.temperature)
    if bounds is not None:
        updated = updated.with_knots(np.clip(updated.knots, bounds[0], bounds[1]))
    return updated, elites[0]
