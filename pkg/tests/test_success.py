import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hiermpc.errors import InvalidInputError
from hiermpc.worlds import Outcome, TaskSpec, check_success, make_world
from hiermpc.worlds import layout as L

MOVE = TaskSpec("move_generic", "move", (2.0, 0.0))
UPRIGHT = TaskSpec("upright_generic", "upright")


def move_state(dist, speed, bearing=0.3):
    w = make_world("push", goal=MOVE.goal_pos)
    s = w.initial_state(object_pose=(2.0 + dist * math.cos(bearing), dist * math.sin(bearing), 0.0))
    return s.replace(OVX=speed * math.cos(1.1), OVY=speed * math.sin(1.1))


def upright_state(err, rate):
    return make_world("hinge").initial_state(theta=math.pi / 2 - err, omega=rate)


def direct(spec, dist, speed, elapsed):
    # the threshold rule written out independently
    if spec.kind == "move":
        ok = dist < spec.pos_tol and speed < spec.vel_tol
    else:
        ok = dist < spec.orient_tol and speed < spec.angvel_tol
    if ok:
        return Outcome.SUCCESS
    return Outcome.TIMEOUT if elapsed > spec.time_limit else Outcome.RUNNING


@pytest.mark.parametrize("dist, speed, elapsed, expected", [
    (0.05, 0.01, 10.0, Outcome.SUCCESS),
    (0.15, 0.0, 10.0, Outcome.RUNNING),
    (0.15, 0.0, 31.0, Outcome.TIMEOUT),
])
def test_threshold_examples(dist, speed, elapsed, expected):
    assert check_success(move_state(dist, speed), MOVE, elapsed) == expected


def test_upright_thresholds():
    assert check_success(upright_state(0.05, 0.01), UPRIGHT, 1.0) == Outcome.SUCCESS
    assert check_success(upright_state(0.15, 0.0), UPRIGHT, 1.0) == Outcome.RUNNING
    assert check_success(upright_state(0.05, 0.2), UPRIGHT, 31.0) == Outcome.TIMEOUT


def test_spec_defaults_and_validation():
    assert (MOVE.pos_tol, MOVE.vel_tol, MOVE.orient_tol, MOVE.angvel_tol, MOVE.time_limit) == (0.1, 0.05, 0.1, 0.05, 30.0)
    with pytest.raises(InvalidInputError):
        TaskSpec("x", "spin")
    with pytest.raises(InvalidInputError):
        TaskSpec("x", pos_tol=0.0)


def test_world_kind_mismatch():
    with pytest.raises(InvalidInputError):
        check_success(upright_state(0, 0), MOVE, 0.0)
    with pytest.raises(InvalidInputError):
        check_success(move_state(0, 0), UPRIGHT, 0.0)


def boundary_samples(n, seed, tol_pos, tol_vel):
    rng = np.random.default_rng(seed)
    # half of the samples sit within a hair of a threshold
    d = np.where(rng.random(n) < 0.5, tol_pos + rng.normal(0, 1e-9, n), rng.uniform(0, 2 * tol_pos, n))
    v = np.where(rng.random(n) < 0.5, tol_vel + rng.normal(0, 1e-9, n), rng.uniform(0, 2 * tol_vel, n))
    t = np.where(rng.random(n) < 0.5, 30.0 + rng.normal(0, 1e-6, n), rng.uniform(0, 60, n))
    return np.abs(d), np.abs(v), t


def test_random_boundary_samples_move():
    for d, v, t in zip(*boundary_samples(1000, 0, 0.1, 0.05)):
        s = move_state(d, v, bearing=d * 7.0)
        got_d = math.hypot(s.vector[L.OX] - 2.0, s.vector[L.OY])
        got_v = math.hypot(s.vector[L.OVX], s.vector[L.OVY])
        assert check_success(s, MOVE, t) == direct(MOVE, got_d, got_v, t)


def test_random_boundary_samples_upright():
    for d, v, t in zip(*boundary_samples(1000, 1, 0.1, 0.05)):
        s = upright_state(min(d, math.pi / 2), v)
        err = abs(math.pi / 2 - s.vector[L.THETA])
        assert check_success(s, UPRIGHT, t) == direct(UPRIGHT, err, abs(s.vector[L.OMEGA]), t)


@given(st.floats(0, 0.3), st.floats(0, 0.1), st.lists(st.floats(0, 60), min_size=2, max_size=10))
def test_monotone_in_elapsed(dist, speed, times):
    s = move_state(dist, speed)
    seen = [check_success(s, MOVE, t) for t in sorted(times)]
    if Outcome.SUCCESS in seen:
        assert set(seen) == {Outcome.SUCCESS}
    else:
        first_timeout = next((i for i, o in enumerate(seen) if o == Outcome.TIMEOUT), len(seen))
        assert all(o == Outcome.RUNNING for o in seen[:first_timeout])
        assert all(o == Outcome.TIMEOUT for o in seen[first_timeout:])
