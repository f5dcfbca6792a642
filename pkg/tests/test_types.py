import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiermpc.errors import InvalidInputError, LayoutError
from hiermpc.types import (
    COMMAND_DIM,
    ActionLayout,
    CommandDefaults,
    CommandVector,
    assemble_command,
    assemble_commands,
    map_gripper,
    mask_leg_command,
)

C = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
S_GRID = [-1.0, -0.6, -0.5, -0.4, 0.0, 0.4, 0.5, 0.6, 1.0]
unit = st.floats(-1.0, 1.0, allow_nan=False)


def _mask_oracle(s, c):
    if s < -0.5:
        return list(c[:3]) + [0.0] * 3
    if s > 0.5:
        return [0.0] * 3 + list(c[3:])
    return [0.0] * 6


@pytest.mark.parametrize("s, expected", [
    (-0.9, [1, 2, 3, 0, 0, 0]),
    (0.0, [0, 0, 0, 0, 0, 0]),
    (0.9, [0, 0, 0, 4, 5, 6]),
])
def test_mask_examples(s, expected):
    assert mask_leg_command([s] + C).tolist() == expected


@pytest.mark.parametrize("s", S_GRID)
def test_mask_grid_matches_branches(s):
    assert mask_leg_command([s] + C).tolist() == _mask_oracle(s, C)


def test_mask_boundaries_select_no_leg():
    # the thresholds are strict on both sides
    assert not mask_leg_command([-0.5] + C).any()
    assert not mask_leg_command([0.5] + C).any()


def test_mask_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        mask_leg_command([np.nan] + C)
    with pytest.raises(LayoutError):
        mask_leg_command(C)


@given(unit, st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6))
def test_mask_zeroes_at_least_three(s, c):
    out = mask_leg_command([s] + c)
    assert np.count_nonzero(out) <= 3
    assert not (out[:3].any() and out[3:].any())
    assert out.tolist() == _mask_oracle(s, c)


@pytest.mark.parametrize("a, expected", [(0.7, 1.0), (-0.2, 0.0), (0.0, 0.0)])
def test_gripper_examples(a, expected):
    assert map_gripper(a, 0.0, 1.0) == expected


@given(unit, st.floats(-2, 2), st.floats(-2, 2))
def test_gripper_binary_image(a, o, c):
    assert map_gripper(a, o, c) in (o, c)


def test_gripper_rejects_nan():
    with pytest.raises(InvalidInputError):
        map_gripper(np.nan, 0.0, 1.0)


def test_layout_dimensions():
    for flags in itertools.product([False, True], repeat=5):
        names = ("include_base", "include_arm", "include_torso", "include_leg", "include_gripper")
        kwargs = dict(zip(names, flags))
        expected = sum(d for d, f in zip((3, 6, 3, 7, 1), flags) if f)
        assert ActionLayout(**kwargs).dim == expected


def test_layout_rejects_inverted_bounds():
    with pytest.raises(LayoutError):
        ActionLayout(include_base=True, include_arm=False, bounds=((0, 1), (1, 1), (0, 1)))
    with pytest.raises(LayoutError):
        ActionLayout(include_base=True, include_arm=False, bounds=((0, 1),))


def test_defaults_reject_nonzero_legs():
    with pytest.raises(InvalidInputError):
        CommandDefaults(default_leg=(1.0,) + (0.0,) * 11)


def test_assemble_base_arm_example():
    d = CommandDefaults(gripper_open=0.0, gripper_close=1.0)
    cmd = assemble_command([0.1, 0, 0, 0, 0, 0, 0, 0, 0], ActionLayout(), d)
    assert cmd.base_vel.tolist() == [0.1, 0, 0]
    assert not cmd.arm_targets.any()
    assert not cmd.leg_targets.any()
    assert cmd.torso_pose.tolist() == list(d.default_torso)
    assert cmd.gripper_pos == 1.0


def test_assemble_gripper_open():
    d = CommandDefaults(gripper_open=0.0, gripper_close=1.0)
    layout = ActionLayout(include_gripper=True)
    cmd = assemble_command([0.1, 0, 0] + [0] * 6 + [-1.0], layout, d)
    assert cmd.gripper_pos == 0.0
    assert cmd.base_vel.tolist() == [0.1, 0, 0]


def test_assemble_all_blocks_passthrough():
    layout = ActionLayout(include_torso=True, include_leg=True, include_gripper=True)
    a = np.concatenate([[0.1, 0.2, 0.3], np.arange(6) * 0.1, [0.05, -0.1, 0.45], [0.9] + C, [0.4]])
    cmd = assemble_command(a, layout, CommandDefaults())
    assert cmd.base_vel.tolist() == [0.1, 0.2, 0.3]
    assert np.array_equal(cmd.arm_targets, np.arange(6) * 0.1)
    assert cmd.torso_pose.tolist() == [0.05, -0.1, 0.45]
    # FR leg chosen: slots 3..6 of the 12-vector, rear legs zero
    assert cmd.leg_targets.tolist() == [0, 0, 0, 4, 5, 6] + [0] * 6
    assert cmd.gripper_pos == CommandDefaults().gripper_close


def test_assemble_dimension_mismatch():
    with pytest.raises(LayoutError):
        assemble_command([0.0] * 8, ActionLayout(), CommandDefaults())


def test_command_vector_round_trip():
    arr = np.arange(COMMAND_DIM) * 0.01
    assert np.array_equal(CommandVector.from_array(arr).to_array(), arr)


layouts = st.builds(ActionLayout, st.booleans(), st.booleans(), st.booleans(), st.booleans(), st.booleans())
FULL = ActionLayout(True, True, True, True, True)


def _project(full_action, layout):
    fs = FULL.slices()
    return np.concatenate([full_action[fs[b]] for b in layout.blocks])


@settings(max_examples=60)
@given(layouts, st.data())
def test_assemble_total_and_no_leak(layout, data):
    if layout.dim == 0:
        return
    full = np.array(data.draw(st.lists(unit, min_size=FULL.dim, max_size=FULL.dim)))
    other = np.array(data.draw(st.lists(unit, min_size=FULL.dim, max_size=FULL.dim)))
    # keep the sampled blocks, scramble the rest
    for b, sl in FULL.slices().items():
        if b in layout.blocks:
            other[sl] = full[sl]
    out = assemble_command(_project(full, layout), layout, CommandDefaults()).to_array()
    assert out.shape == (COMMAND_DIM,) and np.all(np.isfinite(out))
    again = assemble_command(_project(other, layout), layout, CommandDefaults()).to_array()
    assert np.array_equal(out, again)
