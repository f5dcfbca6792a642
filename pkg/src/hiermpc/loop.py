"""Receding-horizon executive: planner and controller at two rates.

The controller runs every 0.02 s. It evaluates the latest published plan at the
plan's age, turns the action into a command and steps the world through the
low-level policy. The planner runs one CEM iteration from the filtered state
estimate and publishes a new nominal. In synchronous mode it runs inline after
2, 3, 2, 3, ... control steps (20 Hz on average). In asynchronous mode it runs on
its own thread against a real-time paced controller.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .costs.tasks import TaskCost, eval_task_cost
from .errors import InvalidInputError, StructuralError
from .optimizer import CemConfig, plan_iteration
from .policy import ReferencePolicy
from .rollout import RolloutEngine, RolloutSpec
from .spline import SplinePlan, evaluate_plan, shift_plan
from .types import ActionLayout, CommandDefaults, assemble_commands
from .worlds import layout as L
from .worlds.base import World
from .worlds.state import WorldState
from .worlds.success import Outcome, TaskSpec, check_success


# --- state fusion ------------------------------------------------------------

def smoothing(dt: float, cutoff_hz: float) -> float:
    """Discrete first-order low-pass coefficient for sample period ``dt``."""
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    if math.isinf(cutoff_hz):
        return 1.0
    return 1.0 - math.exp(-2.0 * math.pi * cutoff_hz * dt)


@dataclass(frozen=True)
class FilterState:
    """Per-channel low-pass estimate.

    ``fast`` marks channels refreshed by every fast sample; the rest refresh only
    when a slow sample arrives. ``angular`` channels are filtered on the circle.
    ``beta`` fixes the coefficient per channel; otherwise it follows from
    ``cutoff`` and the update's dt.
    """

    estimate: np.ndarray
    fast: np.ndarray
    cutoff: np.ndarray | None = None
    beta: np.ndarray | None = None
    angular: np.ndarray | None = None

    def __post_init__(self):
        if self.beta is not None:
            b = np.asarray(self.beta, dtype=float)
            if np.any(b <= 0) or np.any(b > 1):
                raise InvalidInputError("smoothing coefficients must lie in (0, 1]")
        elif self.cutoff is None:
            raise InvalidInputError("a filter needs cutoffs or smoothing coefficients")

    def coefficients(self, dt: float) -> np.ndarray:
        if self.beta is not None:
            return np.broadcast_to(np.asarray(self.beta, dtype=float), self.estimate.shape)
        return np.array([smoothing(dt, c) for c in np.broadcast_to(self.cutoff, self.estimate.shape)])


def fuse_state(filt: FilterState, fast_sample, slow_sample=None, dt: float = 0.02):
    """Blend samples into the estimate: est += beta * (sample - est).

    Fast channels come from ``fast_sample``; slow channels come from
    ``slow_sample`` and hold their previous value when it is None.
    """
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    est = np.asarray(filt.estimate, dtype=float)
    beta = filt.coefficients(dt)
    fast = np.asarray(filt.fast, dtype=bool)
    target = np.where(fast, np.asarray(fast_sample, dtype=float), est)
    update = fast.copy()
    if slow_sample is not None:
        target = np.where(fast, target, np.asarray(slow_sample, dtype=float))
        update[:] = True
    ang = np.zeros(est.shape, dtype=bool) if filt.angular is None else np.asarray(filt.angular, dtype=bool)
    diff = target - est
    diff = np.where(ang, (diff + math.pi) % (2.0 * math.pi) - math.pi, diff)
    new = est + beta * diff
    # beta = 1 passes the sample through exactly
    new = np.where(~ang & (beta == 1.0), target, new)
    new = np.where(update, new, est)
    return replace(filt, estimate=new), new


def world_filter(x0: np.ndarray, fast_cutoff: float = 20.0, slow_cutoff: float = 10.0) -> FilterState:
    """Filter for a flat world state: joint-space channels fast, poses slow."""
    n = x0.size
    fast = np.zeros(n, dtype=bool)
    fast[L.PITCH:L.GRIP + 1] = True
    fast[L.FALLEN] = True
    cutoff = np.full(n, float(slow_cutoff))
    cutoff[fast] = fast_cutoff
    cutoff[L.FALLEN] = math.inf
    angular = np.zeros(n, dtype=bool)
    angular[L.YAW] = True
    if n == L.PUSH_DIM:
        angular[L.OYAW] = True
    return FilterState(np.array(x0, dtype=float), fast, cutoff=cutoff, angular=angular)


# --- plan publication --------------------------------------------------------

@dataclass(frozen=True)
class Publication:
    plan: SplinePlan
    time: float
    version: int


class PlanSlot:
    """Single-writer, single-reader slot; readers always see a whole publication."""

    def __init__(self, plan: SplinePlan, t: float = 0.0):
        self._lock = threading.Lock()
        self._pub = Publication(plan, t, 0)
        self.history: list[Publication] = [self._pub]

    def publish(self, plan: SplinePlan, t: float) -> Publication:
        with self._lock:
            pub = Publication(plan, t, self._pub.version + 1)
            self._pub = pub
            self.history.append(pub)
        return pub

    def read(self) -> Publication:
        with self._lock:
            return self._pub


# --- episodes ----------------------------------------------------------------

@dataclass(frozen=True)
class LoopConfig:
    control_dt: float = 0.02
    plan_pattern: tuple = (2, 3)  # control steps between replans, cycled
    horizon: float = 1.5
    num_knots: int = 4
    interpolation: str = "linear"
    warm_start: bool = True
    use_filter: bool = True  # False feeds ground truth to the planner
    fast_cutoff: float = 20.0
    slow_cutoff: float = 10.0
    mode: str = "sync"  # or "async"
    planner_enabled: bool = True
    fail_on_fall: bool = True
    log_plans: bool = False
    workers: int = 1
    realtime_factor: float = 1.0  # async only: sim seconds per wall second

    def __post_init__(self):
        if self.mode not in ("sync", "async"):
            raise InvalidInputError("mode must be 'sync' or 'async'")
        if not self.plan_pattern or any(int(k) < 1 for k in self.plan_pattern):
            raise InvalidInputError("plan pattern needs positive step counts")
        if not 0 < self.control_dt <= 0.02 + 1e-12:
            raise InvalidInputError("control period must be in (0, 0.02] s")


@dataclass
class EpisodeResult:
    outcome: Outcome
    completion_time: float
    seed: int
    steps: int = 0
    trajectory: np.ndarray | None = None
    log_path: str | None = None
    plan_history: list = field(default_factory=list)
    max_plan_age: float = 0.0
    replans: int = 0
    batch_times: list = field(default_factory=list)  # seconds per rollout batch

    def __post_init__(self):
        self.outcome = Outcome(self.outcome)

    def summary(self) -> dict:
        return {"outcome": self.outcome.value, "completion_time": self.completion_time, "seed": self.seed,
                "steps": self.steps, "replans": self.replans, "max_plan_age": self.max_plan_age}


@dataclass
class _Setup:
    task: TaskSpec
    world: World
    state: WorldState
    spec: RolloutSpec
    cem: CemConfig
    loop: LoopConfig
    seed: int
    log_path: Path | None
    initial_plan: SplinePlan


def _default_plan(loop: LoopConfig, nominal_action) -> SplinePlan:
    return SplinePlan.constant(nominal_action, loop.num_knots, loop.horizon, loop.interpolation)


def _apply(setup: _Setup, state: WorldState, pub: Publication, t: float, policy):
    """One control step: plan action at its age, command, controls, world step."""
    age = max(0.0, t - pub.time)
    action = evaluate_plan(pub.plan, age)
    if setup.spec.raw:
        command = None
        u = np.clip(action, -1.0, 1.0)
    else:
        command = assemble_commands(action[None, :], setup.spec.layout, setup.spec.defaults)[0]
        u = policy.policy_step(state, command)
    nxt = setup.world.step(state, u, setup.loop.control_dt)
    return nxt, action, command, u, age


def _terminal_check(setup: _Setup, state: WorldState, t: float) -> Outcome:
    if not state.is_finite:
        return Outcome.FAILURE
    if setup.loop.fail_on_fall and state.vector[L.FALLEN] > 0.5:
        return Outcome.FAILURE
    return check_success(state, setup.task, t)


def _log_record(setup: _Setup, t, state, action, command, u, age, cost: TaskCost):
    v = state.vector
    frame = setup.world.site_frame(v, u[None, :] if u is not None else None)
    step_cost = eval_task_cost(cost, frame)
    return {
        "t": round(t, 10),
        "robot": v[:L.ROBOT_DIM].tolist(),
        "object": v[L.ROBOT_DIM:].tolist(),
        "action": None if action is None else np.asarray(action).tolist(),
        "command": None if command is None else np.asarray(command).tolist(),
        "controls": None if u is None else np.asarray(u).tolist(),
        "plan_age": round(age, 10),
        "cost": step_cost,
    }


def _run_sync(setup: _Setup, policy) -> EpisodeResult:
    loop = setup.loop
    dt = loop.control_dt
    state = setup.state
    slot = PlanSlot(setup.initial_plan, 0.0)
    filt = world_filter(state.vector, loop.fast_cutoff, loop.slow_cutoff) if loop.use_filter else None
    estimate = state.vector
    steps_limit = int(math.floor(setup.task.time_limit / dt + 1e-9)) + 1
    trajectory = [state.vector]
    records = [] if setup.log_path is not None else None
    plans = []
    max_age = 0.0
    replans = 0
    next_plan = 0
    pattern_i = 0
    outcome = _terminal_check(setup, state, 0.0)
    k = 0
    with RolloutEngine(setup.spec, loop.workers) as engine:
        while outcome == Outcome.RUNNING:
            t = k * dt
            if loop.planner_enabled and k == next_plan:
                pub = slot.read()
                nominal = shift_plan(pub.plan, t - pub.time) if loop.warm_start else setup.initial_plan
                try:
                    new_plan, best = plan_iteration(WorldState(state.kind, estimate), nominal, engine, setup.cem,
                                                    replans)
                except StructuralError:
                    # every sampled rollout diverged: keep executing the current plan
                    new_plan = nominal
                slot.publish(new_plan, t)
                if loop.log_plans:
                    plans.append({"t": t, "knots": new_plan.knots.tolist()})
                replans += 1
                next_plan += int(loop.plan_pattern[pattern_i % len(loop.plan_pattern)])
                pattern_i += 1
            pub = slot.read()
            state, action, command, u, age = _apply(setup, state, pub, t, policy)
            max_age = max(max_age, age)
            k += 1
            t = k * dt
            trajectory.append(state.vector)
            if filt is not None and state.is_finite:
                filt, estimate = fuse_state(filt, state.vector, state.vector, dt)
            else:
                estimate = state.vector
            if records is not None and state.is_finite:
                records.append(_log_record(setup, t, state, action, command, u, age, setup.spec.cost))
            outcome = _terminal_check(setup, state, t)
            if outcome == Outcome.RUNNING and k >= steps_limit:
                outcome = Outcome.TIMEOUT
        batch_times = list(engine.batch_times)
    return _finish(setup, outcome, k, trajectory, records, plans, max_age, replans, batch_times)


def _run_async(setup: _Setup, policy) -> EpisodeResult:
    loop = setup.loop
    dt = loop.control_dt
    state = setup.state
    slot = PlanSlot(setup.initial_plan, 0.0)
    est_lock = threading.Lock()
    shared = {"estimate": state.vector, "t": 0.0}
    stop = threading.Event()
    counter = {"replans": 0}
    plans = []

    def planner(engine):
        it = 0
        while not stop.is_set():
            with est_lock:
                estimate, t_now = shared["estimate"], shared["t"]
            pub = slot.read()
            nominal = shift_plan(pub.plan, max(0.0, t_now - pub.time)) if loop.warm_start else setup.initial_plan
            try:
                new_plan, _ = plan_iteration(WorldState(state.kind, estimate), nominal, engine, setup.cem, it)
            except StructuralError:
                new_plan = nominal
            slot.publish(new_plan, t_now)
            if loop.log_plans:
                plans.append({"t": t_now, "knots": new_plan.knots.tolist()})
            it += 1
            counter["replans"] = it

    filt = world_filter(state.vector, loop.fast_cutoff, loop.slow_cutoff) if loop.use_filter else None
    steps_limit = int(math.floor(setup.task.time_limit / dt + 1e-9)) + 1
    trajectory = [state.vector]
    records = [] if setup.log_path is not None else None
    max_age = 0.0
    outcome = _terminal_check(setup, state, 0.0)
    k = 0
    with RolloutEngine(setup.spec, loop.workers) as engine:
        thread = threading.Thread(target=planner, args=(engine,), daemon=True)
        if loop.planner_enabled and outcome == Outcome.RUNNING:
            thread.start()
        wall0 = time.perf_counter()
        try:
            while outcome == Outcome.RUNNING:
                t = k * dt
                pub = slot.read()
                state, action, command, u, age = _apply(setup, state, pub, t, policy)
                max_age = max(max_age, age)
                k += 1
                t = k * dt
                trajectory.append(state.vector)
                if filt is not None and state.is_finite:
                    filt, estimate = fuse_state(filt, state.vector, state.vector, dt)
                else:
                    estimate = state.vector
                with est_lock:
                    shared["estimate"], shared["t"] = estimate, t
                if records is not None and state.is_finite:
                    records.append(_log_record(setup, t, state, action, command, u, age, setup.spec.cost))
                outcome = _terminal_check(setup, state, t)
                if outcome == Outcome.RUNNING and k >= steps_limit:
                    outcome = Outcome.TIMEOUT
                lag = wall0 + t / loop.realtime_factor - time.perf_counter()
                if lag > 0:
                    time.sleep(lag)
        finally:
            stop.set()
            if thread.is_alive():
                thread.join()
        batch_times = list(engine.batch_times)
    return _finish(setup, outcome, k, trajectory, records, plans, max_age, counter["replans"], batch_times)


def _finish(setup, outcome, k, trajectory, records, plans, max_age, replans, batch_times) -> EpisodeResult:
    dt = setup.loop.control_dt
    log_path = None
    if setup.log_path is not None:
        setup.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(setup.log_path, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
            for p in plans:
                fh.write(json.dumps({"plan": p}) + "\n")
        log_path = str(setup.log_path)
    return EpisodeResult(
        outcome=outcome,
        completion_time=round(k * dt, 10),
        seed=setup.seed,
        steps=k,
        trajectory=np.array(trajectory),
        log_path=log_path,
        plan_history=plans,
        max_plan_age=round(max_age, 10),
        replans=replans,
        batch_times=batch_times,
    )


def run_episode(task: TaskSpec, world: World, state: WorldState, cost: TaskCost, policy=None,
                cem: CemConfig | None = None, seed: int = 0, layout: ActionLayout | None = None,
                defaults: CommandDefaults | None = None, loop: LoopConfig | None = None,
                log_path=None) -> EpisodeResult:
    """Hierarchical episode: the planner samples commands for the low-level policy."""
    loop = loop or LoopConfig()
    layout = layout or ActionLayout()
    defaults = defaults or CommandDefaults()
    policy = policy or ReferencePolicy(params=world.param_array)
    cem = replace(cem or CemConfig(), seed=int(seed))
    spec = RolloutSpec(world, cost, layout, defaults, policy, loop.horizon)
    setup = _Setup(task, world, state, spec, cem, loop, int(seed), Path(log_path) if log_path else None,
                   _default_plan(loop, layout.nominal_action()))
    return _run_sync(setup, policy) if loop.mode == "sync" else _run_async(setup, policy)


def run_episode_flat(task: TaskSpec, world: World, state: WorldState, cost: TaskCost,
                     cem: CemConfig | None = None, seed: int = 0, loop: LoopConfig | None = None,
                     log_path=None) -> EpisodeResult:
    """Flat baseline: the planner samples raw joint controls and replans every control step."""
    loop = replace(loop or LoopConfig(), plan_pattern=(1,))
    cem = replace(cem or CemConfig(), seed=int(seed))
    spec = RolloutSpec(world, cost, None, CommandDefaults(), None, loop.horizon, raw=True)
    setup = _Setup(task, world, state, spec, cem, loop, int(seed), Path(log_path) if log_path else None,
                   _default_plan(loop, np.zeros(L.CONTROL_DIM)))
    return _run_sync(setup, None) if loop.mode == "sync" else _run_async(setup, None)
