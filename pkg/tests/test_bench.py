import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiermpc import cli
from hiermpc.bench import (BenchmarkSuite, ResultRow, ResultTable, SuiteEntry, load_suite, normalize_mode,
                           print_task, run_benchmark, sample_weights, tune_weights)
from hiermpc.config import load_task_config, load_task_file, parse_yaml
from hiermpc.costs import TASK_IDS
from hiermpc.errors import ConfigError, InvalidInputError
from hiermpc.loop import LoopConfig

SHORT = {"time_limit": 0.3}
AT_GOAL = {"init": {"object_at_goal": True}}


def suite(*entries, **kw):
    return BenchmarkSuite(tuple(entries), **kw)


# --- result tables ----------------------------------------------------------------

rows = st.builds(
    lambda task, mode, n, k, tm, ts, lim, none: ResultRow(task, mode, n, min(k, n), min(k, n) / n,
                                                        None if none else tm, None if none else ts, lim),
    st.sampled_from(TASK_IDS), st.sampled_from(["hierarchical", "flat"]), st.integers(1, 50), st.integers(0, 50),
    st.floats(0, 30), st.floats(0, 15), st.floats(0.1, 60), st.booleans())


@settings(max_examples=100)
@given(st.lists(rows, max_size=6))
def test_csv_round_trip(rs):
    table = ResultTable(tuple(rs))
    text = table.to_csv()
    back = ResultTable.from_csv(text)
    assert back == table
    assert back.to_csv() == text


def test_csv_format():
    table = ResultTable((ResultRow("move_generic", "flat", 3, 1, 1 / 3, 2.0, 0.0, 30.0),
                         ResultRow("upright_generic", "hierarchical", 2, 0, 0.0, None, None, 30.0)))
    assert table.to_csv().splitlines() == [
        "task,mode,trials,successes,success_rate,time_mean,time_std,time_limit",
        "move_generic,flat,3,1,0.333333,2.000000,0.000000,30.000000",
        "upright_generic,hierarchical,2,0,0.000000,,,30.000000",
    ]
    with pytest.raises(InvalidInputError):
        ResultTable.from_csv("a,b\n1,2\n")


def test_result_row_validation():
    with pytest.raises(InvalidInputError):
        ResultRow("t", "flat", 1, 1, 1.5, None, None, 1.0)


def test_modes():
    assert normalize_mode("hier") == "hierarchical"
    with pytest.raises(InvalidInputError):
        normalize_mode("deep")
    with pytest.raises(InvalidInputError):
        SuiteEntry("move_generic", trials=0)


# --- running suites -------------------------------------------------------------

def test_object_at_goal_suite():
    s = suite(SuiteEntry("move_generic", trials=3, overrides=AT_GOAL),
              SuiteEntry("upright_generic", trials=3, overrides=AT_GOAL))
    table = run_benchmark(s)
    for task in ("move_generic", "upright_generic"):
        row = table.row(task)
        assert (row.success_rate, row.time_mean, row.time_std) == (1.0, 0.0, 0.0)


def test_trial_order_independence_and_outputs(tmp_path):
    a = SuiteEntry("move_generic", trials=2, base_seed=4, overrides=SHORT)
    b = SuiteEntry("upright_generic", trials=2, overrides={**SHORT, "time_limit": 0.2})
    forward = run_benchmark(suite(a, b), tmp_path / "f")
    backward = run_benchmark(suite(b, a), log=False)
    assert forward.rows == tuple(reversed(backward.rows))
    out = tmp_path / "f"
    assert ResultTable.from_csv((out / "results.csv").read_text()) == forward
    episodes = json.loads((out / "results.json").read_text())["episodes"]
    assert [e["seed"] for e in episodes] == [4, 5, 0, 1]
    timing = json.loads((out / "timing.json").read_text())
    assert timing["hierarchical"]["episode_wall_s"]["count"] == 4
    assert timing["hierarchical"]["rollout_batch_ms"]["mean"] > 0
    assert len(list((out / "logs").glob("*.jsonl"))) == 4


def test_benchmark_is_deterministic_across_workers():
    s = suite(SuiteEntry("move_generic", trials=2, overrides=SHORT),
              SuiteEntry("move_generic", "flat", trials=1, overrides={"time_limit": 0.1}))
    assert run_benchmark(s).to_csv() == run_benchmark(s, workers=2).to_csv()


def test_mode_and_seed_overrides():
    s = suite(SuiteEntry("move_generic"), SuiteEntry("upright_generic", base_seed=3))
    o = s.with_overrides(mode="flat", seed=11)
    assert [(e.mode, e.base_seed) for e in o.entries] == [("flat", 11), ("flat", 11)]
    assert o.entries[0].seeds()[:2] == [11, 12]


# --- config files ---------------------------------------------------------------

def test_every_task_has_a_config():
    for task in TASK_IDS:
        assert load_task_config(task).task_id == task


def test_config_error_reports_file_and_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("task_id: move_generic\nworld: push\nweights:\n  goal: 1.0\n  vel: fast\n")
    with pytest.raises(ConfigError) as exc:
        load_task_file(p)
    assert exc.value.line == 5 and f"{p}:5:" in str(exc.value)
    p.write_text("task_id: move_generic\nspeed: 3\n")
    with pytest.raises(ConfigError, match=":2:"):
        load_task_file(p)
    with pytest.raises(ConfigError):
        parse_yaml("a: [1, 2\n")


def test_suite_errors(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("entries:\n  - task: move_generic\n  - task: fly_to_moon\n")
    with pytest.raises(ConfigError, match="valid ids") as exc:
        load_suite(p)
    assert exc.value.line == 3
    p.write_text("entries: []\n")
    with pytest.raises(ConfigError):
        load_suite(p)
    p.write_text("entries:\n  - task: move_generic\nloop:\n  mode: later\n")
    with pytest.raises(ConfigError, match=":3:"):
        load_suite(p)


def test_suite_loading(tmp_path):
    (tmp_path / "t.yaml").write_text("task_id: move_generic\nworld: push\nkind: move\ngoal: [1.0, 0.0]\n")
    p = tmp_path / "s.yaml"
    p.write_text("name: mine\nbase_seed: 2\ncem:\n  num_samples: 8\n  num_elites: 2\nentries:\n"
                 "  - task: upright_generic\n    mode: hier\n    trials: 3\n    time_limit: 5\n"
                 "  - task_file: t.yaml\n")
    s = load_suite(p)
    assert s.name == "mine" and s.cem.num_samples == 8
    assert s.entries[0].mode == "hierarchical" and s.entries[0].seeds() == [2, 3, 4]
    assert s.entries[0].task_config().time_limit == 5.0
    assert s.entries[1].task_config().goal == (1.0, 0.0)


# --- tuning --------------------------------------------------------------------

SPACE = {"goal": (0.1, 10.0), "vel": (0.01, 3.0)}


def test_sample_weights_prefix_and_range():
    few, many = sample_weights(SPACE, 3, 7), sample_weights(SPACE, 10, 7)
    assert many[:3] == few
    for w in many:
        for k, (lo, hi) in SPACE.items():
            assert lo <= w[k] <= hi
    with pytest.raises(InvalidInputError):
        sample_weights(SPACE, 0, 0)
    with pytest.raises(InvalidInputError):
        sample_weights({"a": (0.0, 1.0)}, 1, 0)


def test_sample_weights_log_uniform():
    logs = [math.log10(w["goal"]) for w in sample_weights({"goal": (0.01, 100.0)}, 4000, 1)]
    # log10 is uniform on [-2, 2]: a quarter of the draws per unit interval
    frac = sum(-1 <= x < 0 for x in logs) / len(logs)
    assert frac == pytest.approx(0.25, abs=0.03)


def test_tune_budget_one_and_curve(tmp_path):
    one = tune_weights("move_generic", 1, 1, overrides=AT_GOAL)
    assert one.best_success == 1.0 and len(one.curve) == 1
    res = tune_weights("move_generic", 3, 1, seed=2, overrides={**SHORT, "init": {"object_range": [0.3, 0.3]}},
                       out_csv=tmp_path / "curve.csv")
    best = [p["best_so_far"] for p in res.curve]
    assert best == sorted(best) and best[-1] == res.best_success
    assert [p["weights"] for p in res.curve] == sample_weights(load_task_config("move_generic").search_space, 3, 2)
    assert (tmp_path / "curve.csv").read_text().count("\n") == 4


def test_tune_requires_search_space():
    with pytest.raises(ConfigError):
        tune_weights("move_generic", 1, 1, search_space={})


# --- listing and CLI -----------------------------------------------------------

def test_print_task():
    lines = print_task("move_generic").splitlines()
    assert len(lines) == 3
    assert [ln.split()[0] for ln in lines] == ["goal", "gripper", "vel"]
    assert "exp_abs_component" in print_task("tire_upright")
    with pytest.raises(InvalidInputError, match="valid ids"):
        print_task("nope")


def test_cli_print_task(capsys):
    assert cli.main(["print-task", "move_generic"]) == 0
    assert "goal_distance" in capsys.readouterr().out
    assert cli.main(["print-task", "nope"]) == 2
    assert "bench: error: unknown task id" in capsys.readouterr().err


def test_cli_run(tmp_path, capsys):
    s = tmp_path / "s.yaml"
    s.write_text("entries:\n  - task: move_generic\n    trials: 1\n    overrides:\n"
                 "      init: {object_at_goal: true}\n")
    assert cli.main(["run", "--suite", str(s), "--out", str(tmp_path / "o"), "--no-logs"]) == 0
    out = capsys.readouterr().out
    assert "move_generic,hierarchical,1,1,1.000000" in out
    assert (tmp_path / "o" / "results.csv").exists() and not (tmp_path / "o" / "logs").exists()
    assert cli.main(["run", "--suite", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 2


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--suite", "x.yaml"])
    assert exc.value.code == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "hiermpc.cli", "print-task", "upright_generic"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "quat_distance" in r.stdout
