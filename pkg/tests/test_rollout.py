import json
import math

import numpy as np
import pytest

from hiermpc.costs import assemble_task_cost
from hiermpc.errors import InvalidInputError, StructuralError
from hiermpc.policy import LowLevelPolicy, PassThroughPolicy, ReferencePolicy, policy_step
from hiermpc.rollout import RolloutEngine, RolloutSpec, num_steps, rollout, rollout_batch
from hiermpc.spline import SplinePlan
from hiermpc.types import COMMAND_DIM, ActionLayout, CommandDefaults, assemble_command
from hiermpc.worlds import READY_ARM, make_world
from hiermpc.worlds import kernels as K
from hiermpc.worlds import layout as L

H = 1.5
LAYOUT = ActionLayout(nominal=(0.0, 0.0, 0.0) + READY_ARM)


@pytest.fixture(scope="module")
def world():
    return make_world("push", goal=(2.0, 0.0))


@pytest.fixture(scope="module")
def spec(world):
    return RolloutSpec(world, assemble_task_cost("move_generic"), LAYOUT)


def random_plans(n, seed=0, dim=9, scale=0.3):
    rng = np.random.default_rng(seed)
    nominal = np.array(LAYOUT.nominal) if dim == 9 else np.zeros(dim)
    return [SplinePlan.uniform(nominal + rng.normal(size=(4, dim)) * scale, H) for _ in range(n)]


def same(a, b):
    return (np.array_equal(a.trajectory, b.trajectory) and a.total_cost == b.total_cost
            and np.array_equal(a.step_costs, b.step_costs) and a.failed == b.failed
            and np.array_equal(a.controls, b.controls))


def command(**blocks):
    c = np.zeros(COMMAND_DIM)
    c[22:25] = (0.0, 0.0, 0.5)
    c[3:9] = READY_ARM
    for name, (sl, value) in blocks.items():
        c[sl] = value
    return c


# --- policy ---------------------------------------------------------------------

def test_policy_at_setpoint_is_zero(world):
    s = world.initial_state()
    u = policy_step(world.robot(s), command(), ReferencePolicy(params=world.param_array))
    assert np.array_equal(u, np.zeros(19))


def test_policy_forward_command_drives_forward(world):
    s = world.initial_state()
    u = policy_step(world.robot(s), command(base=(slice(0, 1), 0.5)))
    body = K.LEG_MIX @ u[:12]
    # K_vel * (0.5 - 0) = 2, normalized by the base acceleration limit of 3
    assert body[0] > 0
    assert body[0] == pytest.approx(4.0 * 0.5 / 3.0, rel=1e-9)


def test_policy_arm_saturates(world):
    s = world.initial_state()
    u = policy_step(s, command(arm=(slice(3, 4), 100.0)))
    assert u[L.U_ARM] == 1.0


def test_policy_rejects_non_finite(world):
    v = world.initial_state().vector.copy()
    v[L.VX] = np.nan
    with pytest.raises(InvalidInputError):
        policy_step(v, command())
    with pytest.raises(InvalidInputError):
        policy_step(world.initial_state(), np.zeros(5))


def test_policies_satisfy_protocol():
    assert isinstance(ReferencePolicy(), LowLevelPolicy)
    assert isinstance(PassThroughPolicy(), LowLevelPolicy)
    assert ReferencePolicy().control_period == 0.02


def test_python_policy_matches_compiled_rollout(world, spec):
    # a policy the engine does not recognize runs from Python; same map, same result
    class Wrapped:
        control_period = 0.02

        def __init__(self):
            self.inner = ReferencePolicy(params=world.param_array)

        def policy_step(self, state, cmd):
            return self.inner.policy_step(state, cmd)

    plan = random_plans(1, 4)[0]
    s = world.initial_state(object_pose=(0.9, 0.1, 0.0))
    slow = rollout(s, plan, RolloutSpec(world, spec.cost, LAYOUT, policy=Wrapped()))
    fast = rollout(s, plan, spec)
    assert np.allclose(slow.trajectory, fast.trajectory, atol=1e-12)


# --- rollouts --------------------------------------------------------------------

def test_num_steps():
    assert num_steps(1.5, 0.02) == 75
    assert num_steps(0.05, 0.02) == 2


def test_result_shapes_and_sum(world, spec):
    r = rollout(world.initial_state(), random_plans(1)[0], spec)
    assert r.trajectory.shape == (math.floor(H / 0.02) + 1, world.dim)
    assert r.step_costs.shape == (75,) and r.controls.shape == (75, 19)
    assert abs(r.total_cost - (math.fsum(r.step_costs) + r.terminal_cost)) <= 1e-12
    assert len(r.states("push")) == 76


def test_terminal_cost_counted(world):
    spec = RolloutSpec(world, assemble_task_cost("move_generic", terminal_only=True), LAYOUT)
    r = rollout(world.initial_state(), random_plans(1)[0], spec)
    assert np.all(r.step_costs == 0) and r.terminal_cost > 0
    assert r.total_cost == r.terminal_cost


def test_zero_action_rollout_is_static(world, spec):
    s = world.initial_state(object_pose=(3.0, 1.0, 0.0))
    r = rollout(s, SplinePlan.constant(LAYOUT.nominal_action(), 4, H), spec)
    assert np.all(r.trajectory == s.vector)


def test_rollout_deterministic(world, spec):
    plan = random_plans(1, 7)[0]
    s = world.initial_state(object_pose=(0.8, 0.0, 0.0))
    assert same(rollout(s, plan, spec), rollout(s, plan, spec))


def test_batch_order_and_size(world, spec):
    plans = random_plans(32, 1)
    s = world.initial_state(object_pose=(0.9, 0.0, 0.0))
    out = rollout_batch(s, plans, spec)
    assert len(out) == 32
    for i in (0, 13, 31):
        assert same(out[i], rollout(s, plans[i], spec))


def test_batch_of_one(world, spec):
    plan = random_plans(1, 2)[0]
    s = world.initial_state()
    assert same(rollout_batch(s, [plan], spec)[0], rollout(s, plan, spec))


def test_serial_equals_parallel(world, spec):
    plans = random_plans(32, 3)
    s = world.initial_state(object_pose=(0.7, -0.1, 0.0))
    serial = rollout_batch(s, plans, spec, workers=1)
    parallel = rollout_batch(s, plans, spec, workers=4)
    assert all(same(a, b) for a, b in zip(serial, parallel))


def test_empty_batch_and_bad_dimension(world, spec):
    with pytest.raises(StructuralError):
        rollout_batch(world.initial_state(), [], spec)
    with pytest.raises(StructuralError):
        rollout(world.initial_state(), SplinePlan.uniform(np.zeros((4, 3)), H), spec)


def test_non_finite_start_rejected(world, spec):
    with pytest.raises(InvalidInputError):
        rollout(world.initial_state().replace(OX=np.inf), random_plans(1)[0], spec)


def test_failures_are_isolated(world):
    class Fragile:
        """Blows up whenever the commanded forward speed is high."""

        control_period = 0.02

        def policy_step(self, state, cmd):
            if cmd[0] > 0.3:
                return np.full(19, np.nan)
            return np.zeros(19)

    spec = RolloutSpec(world, assemble_task_cost("move_generic"), LAYOUT, policy=Fragile())
    calm = SplinePlan.constant(LAYOUT.nominal_action(), 4, H)
    wild = calm.with_knots(calm.knots + np.array([0.5] + [0.0] * 8))
    ok, bad = rollout_batch(world.initial_state(), [calm, wild], spec)
    assert not ok.failed and math.isfinite(ok.total_cost)
    assert bad.failed and bad.total_cost == math.inf


def test_policy_in_loop_differs_from_passthrough(world):
    # the same 9-dim plan: the reference policy tracks the commanded base velocity,
    # reading it directly as joint controls does not
    cost = assemble_task_cost("move_generic")
    plan = SplinePlan.constant(np.array([0.3, 0.0, 0.0] + list(READY_ARM)), 4, 3.0)
    s = world.initial_state(object_pose=(9.0, 0.0, 0.0))
    tracked = rollout(s, plan, RolloutSpec(world, cost, LAYOUT, horizon=3.0))
    raw = rollout(s, plan, RolloutSpec(world, cost, LAYOUT, policy=PassThroughPolicy(), horizon=3.0))
    assert not np.array_equal(tracked.trajectory, raw.trajectory)
    # velocity loop against base drag settles at k v / (k + drag)
    settled = 4.0 * 0.3 / (4.0 + world.params.base_drag)
    assert tracked.trajectory[-1, L.VX] == pytest.approx(settled, abs=1e-6)
    assert abs(raw.trajectory[-1, L.VX] - 0.3) > 0.2


def test_raw_rollout_dimensions(world):
    spec = RolloutSpec(world, assemble_task_cost("e2e_mpc_move"), raw=True)
    assert spec.action_dim == 19
    r = rollout(world.initial_state(), SplinePlan.uniform(np.zeros((4, 19)), H), spec)
    assert r.controls.shape == (75, 19)


def test_engine_bounds_and_timing(tmp_path, world, spec):
    with RolloutEngine(spec, workers=2) as engine:
        lo, hi = engine.bounds
        assert np.array_equal(lo, LAYOUT.lower) and np.array_equal(hi, LAYOUT.upper)
        engine.run(world.initial_state(), random_plans(4))
        engine.run(world.initial_state(), random_plans(4))
        t = engine.timing()
        assert t["count"] == 2 and t["mean_ms"] > 0
        engine.write_timing(tmp_path / "timing.json")
    assert json.loads((tmp_path / "timing.json").read_text())["count"] == 2
    raw = RolloutEngine(RolloutSpec(world, spec.cost, raw=True))
    assert np.array_equal(raw.bounds[1], np.ones(19))


def test_assembled_commands_feed_rollout(world, spec):
    # the rollout's first command is exactly the assembled command of the plan's first knot
    plan = random_plans(1, 9)[0]
    cmd = assemble_command(plan.knots[0], LAYOUT, CommandDefaults())
    u = policy_step(world.initial_state(), cmd, ReferencePolicy(params=world.param_array))
    r = rollout(world.initial_state(), plan, spec)
    assert np.array_equal(r.controls[0], u)
