"""Policy-in-the-loop rollouts of spline plans, singly or in batches.

A rollout evaluates the plan at every control step, assembles commands, runs
the low-level policy and steps the world. The simulation loop is compiled and
releases the GIL, so a batch's simulations parallelize across threads. Costs are
then evaluated row-wise over the stacked trajectories, which keeps every result
identical for any batch size or worker count.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .costs.tasks import TaskCost, resolve_derived
from .costs.terms import eval_term
from .errors import InvalidInputError, StructuralError
from .policy import ReferencePolicy
from .spline import SplinePlan, evaluate_stack
from .types import ActionLayout, CommandDefaults, assemble_commands
from .worlds import kernels as K
from .worlds import layout as L
from .worlds.base import World, pad_controls, pad_gripper
from .worlds.state import WorldState


@dataclass(frozen=True)
class RolloutResult:
    trajectory: np.ndarray  # (T+1, n) flat world states
    total_cost: float
    step_costs: np.ndarray  # (T,)
    failed: bool
    controls: np.ndarray  # (T, 19)
    terminal_cost: float = 0.0

    def states(self, kind: str) -> list[WorldState]:
        return [WorldState(kind, row) for row in self.trajectory]


def num_steps(horizon: float, dt: float) -> int:
    # a tiny slack keeps 1.5 / 0.02 from landing on 74.999...
    return int(math.floor(horizon / dt + 1e-9))


@dataclass(frozen=True)
class RolloutSpec:
    """Everything a rollout needs besides the start state and the plan."""

    world: World
    cost: TaskCost
    layout: ActionLayout | None = None
    defaults: CommandDefaults = CommandDefaults()
    policy: object = None
    horizon: float = 1.5
    raw: bool = False  # plan actions are joint controls; no policy in the loop

    def __post_init__(self):
        if self.horizon <= 0:
            raise InvalidInputError("horizon must be positive")
        if self.policy is None:
            object.__setattr__(self, "policy", ReferencePolicy(params=self.world.param_array))
        if not self.raw and self.layout is None:
            object.__setattr__(self, "layout", ActionLayout())

    @property
    def steps(self) -> int:
        return num_steps(self.horizon, self.world.dt)

    @property
    def action_dim(self) -> int:
        return L.CONTROL_DIM if self.raw else self.layout.dim


def _inputs(spec: RolloutSpec, plans) -> tuple[np.ndarray, int | None]:
    for plan in plans:
        if plan.dim != spec.action_dim:
            raise StructuralError(f"plan dimension {plan.dim} does not match action dimension {spec.action_dim}")
    times = np.arange(spec.steps) * spec.world.dt
    actions = evaluate_stack(plans, times)
    if spec.raw:
        return np.ascontiguousarray(actions), L.MODE_RAW
    p, t, d = actions.shape
    commands = assemble_commands(actions.reshape(p * t, d), spec.layout, spec.defaults).reshape(p, t, -1)
    return commands, getattr(spec.policy, "mode", None)


def _simulate(spec: RolloutSpec, x0: np.ndarray, inputs: np.ndarray, mode):
    w = spec.world
    if mode is not None:
        gains = spec.policy.gains.to_array()
        return K.simulate(w.code, x0, inputs, mode, w.param_array, gains, w.dt, w.params.substeps,
                          K.LEG_MIX, K.LEG_MIX_PINV, K.LEG_NULL)
    # arbitrary Python policy: step it from the interpreter
    steps = inputs.shape[0]
    states = np.empty((steps + 1, x0.size))
    controls = np.zeros((steps, L.CONTROL_DIM))
    states[0] = x0
    x = x0.copy()
    failed = False
    for t in range(steps):
        if not failed:
            try:
                u = np.clip(np.asarray(spec.policy.policy_step(x, inputs[t]), dtype=float), -1.0, 1.0)
            except InvalidInputError:
                failed = True
            else:
                controls[t] = u
                x = K.world_step_kernel(w.code, x, u, w.param_array, w.dt, w.params.substeps, K.LEG_MIX)
                failed = not np.all(np.isfinite(x))
        states[t + 1] = x
    return states, controls, failed


def _take_rows(value, idx, n_rows):
    # constants (goal sites, fixed axes) broadcast against every row and stay as they are
    v = np.asarray(value)
    if v.ndim == 0 or v.shape[0] != n_rows:
        return v
    return v[idx]


def score(spec: RolloutSpec, states, controls, commands=None):
    """Running costs (P, T) over rows 1..T and terminal costs (P,) at row T.

    ``states`` is (P, T+1, n). All trajectories are scored in one pass over the
    stacked rows; every term is evaluated row by row, so a trajectory's costs do
    not depend on what it is stacked with.
    """
    p, rows, n = states.shape
    u_rows = pad_controls(controls).reshape(p * rows, -1)
    g_rows = None if commands is None else pad_gripper(commands).reshape(p * rows)
    frame = spec.world.row_frame(states.reshape(p * rows, n), u_rows, g_rows)
    frame = resolve_derived(frame, spec.cost.derived)
    per_row = np.zeros(p * rows)
    for term in spec.cost.terms:
        per_row = per_row + np.broadcast_to(eval_term(term, frame), per_row.shape)
    per_row = per_row.reshape(p, rows)
    terminal = np.zeros(p)
    if spec.cost.terminal_terms:
        last = np.arange(p) * rows + rows - 1
        end = type(frame)(*({k: _take_rows(v, last, p * rows) for k, v in t.items()} for t in
                            (frame.sites, frame.axes, frame.vectors, frame.quats, frame.scalars)))
        for term in spec.cost.terminal_terms:
            terminal = terminal + np.broadcast_to(eval_term(term, end), terminal.shape)
    return per_row[:, 1:], terminal


def _simulate_all(spec: RolloutSpec, x0, inputs, mode, pool):
    if pool is None:
        return [_simulate(spec, x0, inputs[i], mode) for i in range(len(inputs))]
    return list(pool.map(lambda i: _simulate(spec, x0, inputs[i], mode), range(len(inputs))))


def _run_batch(spec: RolloutSpec, x0: np.ndarray, plans, pool=None) -> list[RolloutResult]:
    inputs, mode = _inputs(spec, plans)
    sims = _simulate_all(spec, x0, inputs, mode, pool)
    states = np.stack([s for s, _, _ in sims])
    controls = np.stack([u for _, u, _ in sims])
    failed = np.array([f for _, _, f in sims])
    # diverged trajectories are scored on zeros and then discarded
    safe = np.where(failed[:, None, None], 0.0, states)
    step_costs, terminal = score(spec, safe, controls, None if spec.raw else inputs)
    out = []
    for i in range(len(plans)):
        if failed[i]:
            out.append(RolloutResult(states[i], math.inf, np.full(spec.steps, math.inf), True, controls[i], math.inf))
            continue
        total = 0.0
        for c in step_costs[i]:
            total += c
        total += terminal[i]
        bad = not math.isfinite(total)
        out.append(RolloutResult(states[i], math.inf if bad else float(total), step_costs[i].copy(), bad,
                                 controls[i], float(terminal[i])))
    return out


def _start(state) -> np.ndarray:
    x = np.array(state.vector if isinstance(state, WorldState) else state, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("start state is not finite")
    return x


def rollout(state, plan: SplinePlan, spec: RolloutSpec) -> RolloutResult:
    """Roll ``plan`` forward from ``state`` through the policy and world of ``spec``."""
    return _run_batch(spec, _start(state), [plan])[0]


def rollout_batch(state, plans, spec: RolloutSpec, workers: int = 1, pool: ThreadPoolExecutor | None = None):
    """Results in plan order; identical to running ``rollout`` on each plan."""
    plans = list(plans)
    if not plans:
        raise StructuralError("rollout batch needs at least one plan")
    x0 = _start(state)
    if pool is None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return _run_batch(spec, x0, plans, ex)
    return _run_batch(spec, x0, plans, pool)


class RolloutEngine:
    """Reusable batch runner with a persistent worker pool and timing record."""

    def __init__(self, spec: RolloutSpec, workers: int = 1):
        self.spec = spec
        self.workers = max(1, int(workers))
        self._pool = ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None
        self.batch_times: list[float] = []

    def run(self, state, plans) -> list[RolloutResult]:
        t0 = time.perf_counter()
        out = rollout_batch(state, plans, self.spec, pool=self._pool)
        self.batch_times.append(time.perf_counter() - t0)
        return out

    @property
    def bounds(self):
        if self.spec.raw:
            return -np.ones(L.CONTROL_DIM), np.ones(L.CONTROL_DIM)
        return self.spec.layout.lower, self.spec.layout.upper

    def timing(self) -> dict:
        ms = np.asarray(self.batch_times) * 1000.0
        if ms.size == 0:
            return {"mean_ms": 0.0, "std_ms": 0.0, "count": 0}
        return {"mean_ms": float(ms.mean()), "std_ms": float(ms.std()), "count": int(ms.size)}

    def write_timing(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.timing(), fh, indent=2)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
