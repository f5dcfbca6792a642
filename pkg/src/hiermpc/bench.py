"""Seeded benchmark suites, result tables and weight tuning."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import ConfigError, TaskConfig, load_task_config, load_task_file, load_yaml
from .costs.tasks import TASK_IDS, assemble_task_cost
from .errors import InvalidInputError
from .loop import EpisodeResult, LoopConfig, run_episode, run_episode_flat
from .optimizer import CemConfig
from .types import BLOCK_ORDER, ActionLayout
from .worlds.base import READY_ARM, WorldParams, make_world
from .worlds.success import Outcome, TaskSpec

MODES = ("hierarchical", "flat")
_MODE_ALIASES = {"hier": "hierarchical", "hierarchical": "hierarchical", "flat": "flat"}
_BLOCK_NOMINAL = {"base": (0.0, 0.0, 0.0), "arm": READY_ARM, "torso": (0.0, 0.0, 0.5),
                  "leg": (0.0,) * 7, "gripper": (-1.0,)}


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise InvalidInputError(f"mode must be one of {sorted(_MODE_ALIASES)}, got {mode!r}") from None


# --- trial construction ----------------------------------------------------------

def layout_from_config(cfg: TaskConfig) -> ActionLayout:
    spec = dict(cfg.layout)
    flags = {f"include_{b}": bool(spec.pop(f"include_{b}", b in ("base", "arm"))) for b in BLOCK_ORDER}
    bounds = spec.pop("bounds", None)
    nominal = spec.pop("nominal", None)
    if spec:
        raise ConfigError(f"unknown layout keys {sorted(spec)}")
    if nominal is None:
        nominal = [v for b in BLOCK_ORDER if flags[f"include_{b}"] for v in _BLOCK_NOMINAL[b]]
    return ActionLayout(**flags, bounds=None if bounds is None else tuple(map(tuple, bounds)), nominal=tuple(nominal))


def initial_state(cfg: TaskConfig, world, seed: int):
    """Randomized start for trial ``seed`` within the config's init bounds."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7919]))
    init = cfg.init

    def draw(name, default):
        lo, hi = init.get(name, (default, default))
        return float(rng.uniform(lo, hi)) if hi > lo else float(lo)

    robot = (draw("robot_x", 0.0), draw("robot_y", 0.0), draw("robot_yaw", 0.0))
    if cfg.world == "push":
        r = draw("object_range", 1.0)
        b = draw("object_bearing", 0.0)
        oyaw = draw("object_yaw", 0.0)
        obj = (robot[0] + r * math.cos(robot[2] + b), robot[1] + r * math.sin(robot[2] + b), oyaw)
        if init.get("object_at_goal", False):
            obj = (float(world.goal[0]), float(world.goal[1]), oyaw)
        return world.initial_state(robot_pose=robot, object_pose=obj)
    if cfg.world == "hinge":
        theta = math.pi / 2 if init.get("object_at_goal", False) else draw("theta", 0.0)
        return world.initial_state(robot_pose=robot, theta=theta)
    raise ConfigError(f"task {cfg.task_id!r} has no simulated world")


def task_spec(cfg: TaskConfig) -> TaskSpec:
    return TaskSpec(cfg.task_id, cfg.kind or ("upright" if cfg.world == "hinge" else "move"),
                    tuple(cfg.goal), time_limit=cfg.time_limit)


@dataclass(frozen=True)
class Trial:
    cfg: TaskConfig
    mode: str
    seed: int
    cem: CemConfig
    loop: LoopConfig
    log_path: str | None = None


def run_trial(trial: Trial) -> EpisodeResult:
    cfg = trial.cfg
    if cfg.world is None:
        raise ConfigError(f"task {cfg.task_id!r} cannot be simulated (no world)")
    world = make_world(cfg.world, WorldParams.from_dict(cfg.world_params), cfg.goal)
    state = initial_state(cfg, world, trial.seed)
    spec = task_spec(cfg)
    if trial.mode == "flat":
        cost = assemble_task_cost("e2e_mpc_move", config=_flat_config(cfg))
        return run_episode_flat(spec, world, state, cost, trial.cem, trial.seed, trial.loop, trial.log_path)
    cost = assemble_task_cost(cfg.task_id, config=cfg)
    return run_episode(spec, world, state, cost, None, trial.cem, trial.seed, layout_from_config(cfg),
                       None, trial.loop, trial.log_path)


def _flat_config(cfg: TaskConfig) -> TaskConfig:
    # the flat planner keeps its own locomotion terms; task weights override the shared ones
    base = load_task_config("e2e_mpc_move")
    if cfg.task_id == "e2e_mpc_move":
        return cfg
    shared = {k: v for k, v in cfg.weights.items() if k in base.weights}
    return base.merged({"weights": shared})


# --- suites ---------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteEntry:
    task_id: str
    mode: str = "hierarchical"
    trials: int = 20
    base_seed: int = 0
    overrides: dict = field(default_factory=dict)
    task_file: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidInputError("trials must be at least 1")
        object.__setattr__(self, "mode", normalize_mode(self.mode))

    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.trials)]

    def task_config(self) -> TaskConfig:
        cfg = load_task_file(self.task_file) if self.task_file else load_task_config(self.task_id)
        return cfg.merged(self.overrides)


@dataclass(frozen=True)
class BenchmarkSuite:
    entries: tuple
    cem: CemConfig = CemConfig()
    loop: LoopConfig = LoopConfig()
    name: str = "suite"

    def __post_init__(self):
        if not self.entries:
            raise InvalidInputError("a suite needs at least one entry")

    def with_overrides(self, mode: str | None = None, seed: int | None = None) -> BenchmarkSuite:
        entries = self.entries
        if mode is not None:
            entries = tuple(replace(e, mode=normalize_mode(mode)) for e in entries)
        if seed is not None:
            entries = tuple(replace(e, base_seed=int(seed)) for e in entries)
        return replace(self, entries=entries)


_SUITE_KEYS = {"name", "base_seed", "entries", "cem", "loop"}
_ENTRY_KEYS = {"task", "task_file", "mode", "trials", "base_seed", "overrides", "time_limit"}


def load_suite(path) -> BenchmarkSuite:
    path = Path(path)
    data = load_yaml(path)
    line = getattr(data, "line_of", lambda k: None)
    for key in data:
        if key not in _SUITE_KEYS:
            raise ConfigError(f"unknown suite key {key!r}", path, line(key))
    raw = data.get("entries")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("'entries' must be a non-empty list", path, line("entries"))
    base_seed = data.get("base_seed", 0)
    entries = []
    for item in raw:
        item_line = getattr(item, "line", None)
        if not isinstance(item, dict):
            raise ConfigError("each entry must be a mapping", path, line("entries"))
        for key in item:
            if key not in _ENTRY_KEYS:
                raise ConfigError(f"unknown entry key {key!r}", path, item.line_of(key))
        task_file = item.get("task_file")
        if task_file is not None:
            task_file = str((path.parent / task_file).resolve())
            task_id = load_task_file(task_file).task_id
        else:
            task_id = item.get("task")
            if task_id not in TASK_IDS:
                raise ConfigError(f"unknown task {task_id!r}; valid ids: {', '.join(TASK_IDS)}", path,
                                  item.line_of("task") if "task" in item else item_line)
        overrides = dict(item.get("overrides", {}) or {})
        if "time_limit" in item:
            overrides["time_limit"] = item["time_limit"]
        try:
            entries.append(SuiteEntry(task_id, item.get("mode", "hierarchical"), int(item.get("trials", 20)),
                                      int(item.get("base_seed", base_seed)), overrides, task_file))
            entries[-1].task_config()
        except (InvalidInputError, ConfigError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError) and exc.path is not None:
                raise
            raise ConfigError(str(exc), path, item_line) from None
    try:
        cem = CemConfig.from_dict(data.get("cem", {}) or {})
        loop = LoopConfig(**(data.get("loop", {}) or {}))
    except (InvalidInputError, TypeError) as exc:
        key = "cem" if "cem" in data else "loop"
        raise ConfigError(str(exc), path, line(key)) from None
    return BenchmarkSuite(tuple(entries), cem, loop, str(data.get("name", path.stem)))


# --- result tables ------------------------------------------------------------

CSV_FIELDS = ("task", "mode", "trials", "successes", "success_rate", "time_mean", "time_std", "time_limit")
DECIMALS = 6


def _fmt(x) -> str:
    return "" if x is None else f"{x:.{DECIMALS}f}"


def _rounded(x):
    return None if x is None else round(float(x), DECIMALS)


@dataclass(frozen=True)
class ResultRow:
    """Aggregate over one suite entry. Completion-time stats cover successful trials only."""

    task: str
    mode: str
    trials: int
    successes: int
    success_rate: float
    time_mean: float | None
    time_std: float | None
    time_limit: float

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise InvalidInputError("success rate must lie in [0, 1]")
        for name in ("success_rate", "time_mean", "time_std", "time_limit"):
            object.__setattr__(self, name, _rounded(getattr(self, name)))

    @classmethod
    def from_outcomes(cls, task, mode, results, time_limit) -> ResultRow:
        times = sorted(r.completion_time for r in results if r.outcome == Outcome.SUCCESS)
        n = len(results)
        mean = float(np.mean(times)) if times else None
        std = float(np.std(times)) if times else None
        return cls(task, mode, n, len(times), len(times) / n, mean, std, time_limit)


@dataclass(frozen=True)
class ResultTable:
    rows: tuple

    def to_csv(self) -> str:
        """Fixed format: rates, times and limits with six decimals; empty cells when nothing succeeded."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([r.task, r.mode, r.trials, r.successes, _fmt(r.success_rate), _fmt(r.time_mean),
                        _fmt(r.time_std), _fmt(r.time_limit)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> ResultTable:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise InvalidInputError(f"unexpected CSV header {reader.fieldnames}")
        rows = []
        for rec in reader:
            opt = {k: (float(rec[k]) if rec[k] else None) for k in ("time_mean", "time_std")}
            rows.append(ResultRow(rec["task"], rec["mode"], int(rec["trials"]), int(rec["successes"]),
                                  float(rec["success_rate"]), opt["time_mean"], opt["time_std"],
                                  float(rec["time_limit"])))
        return cls(tuple(rows))

    def to_json(self) -> list:
        return [asdict(r) for r in self.rows]

    def row(self, task: str, mode: str = "hierarchical") -> ResultRow:
        for r in self.rows:
            if r.task == task and r.mode == normalize_mode(mode):
                return r
        raise KeyError((task, mode))


def _trial_list(suite: BenchmarkSuite, out_dir: Path | None, log: bool):
    trials = []
    for ei, entry in enumerate(suite.entries):
        cfg = entry.task_config()
        for seed in entry.seeds():
            log_path = None
            if out_dir is not None and log:
                log_path = str(out_dir / "logs" / f"{ei:02d}_{entry.task_id}_{entry.mode}_{seed}.jsonl")
            trials.append((ei, Trial(cfg, entry.mode, seed, suite.cem, suite.loop, log_path)))
    return trials


def _timed_trial(trial: Trial):
    t0 = time.perf_counter()
    result = run_trial(trial)
    return result, time.perf_counter() - t0


def run_benchmark(suite: BenchmarkSuite, out_dir=None, workers: int = 1, log: bool = True) -> ResultTable:
    """Run every trial of the suite and aggregate per entry.

    Writes results.csv, results.json, timing.json and logs/ under ``out_dir``
    when given. Failed episodes count as non-successes and never stop the suite.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    trials = _trial_list(suite, out, log)
    jobs = [t for _, t in trials]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            finished = list(ex.map(_timed_trial, jobs))
    else:
        finished = [_timed_trial(t) for t in jobs]
    per_entry: dict[int, list] = {}
    for (ei, _), (res, _) in zip(trials, finished):
        per_entry.setdefault(ei, []).append(res)
    rows = []
    for ei, entry in enumerate(suite.entries):
        cfg = entry.task_config()
        rows.append(ResultRow.from_outcomes(entry.task_id, entry.mode, per_entry[ei], cfg.time_limit))
    table = ResultTable(tuple(rows))
    if out is not None:
        (out / "results.csv").write_text(table.to_csv())
        episodes = [
            {"entry": ei, "task": t.cfg.task_id, "mode": t.mode, **r.summary()}
            for (ei, t), (r, _) in zip(trials, finished)
        ]
        (out / "results.json").write_text(json.dumps({"suite": suite.name, "rows": table.to_json(),
                                                      "episodes": episodes}, indent=2))
        (out / "timing.json").write_text(json.dumps(timing_summary(trials, finished), indent=2))
    return table


def _stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": None, "std": None, "count": 0}
    return {"mean": float(v.mean()), "std": float(v.std()), "count": int(v.size)}


def timing_summary(trials, finished) -> dict:
    """Wall time per episode and per rollout batch, split by controller mode."""
    out = {}
    for mode in MODES:
        picked = [(r, w) for (_, t), (r, w) in zip(trials, finished) if t.mode == mode]
        if not picked:
            continue
        out[mode] = {
            "episode_wall_s": _stats([w for _, w in picked]),
            "rollout_batch_ms": _stats([1000.0 * b for r, _ in picked for b in r.batch_times]),
        }
    return out


# --- weight tuning ---------------------------------------------------------------

@dataclass(frozen=True)
class TuneResult:
    best_weights: dict
    best_success: float
    curve: list  # dicts: candidate, success_rate, best_so_far, wall_time, weights

    def to_csv(self) -> str:
        names = sorted(self.best_weights)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["candidate", "success_rate", "best_so_far", "wall_time_s", *names])
        for p in self.curve:
            w.writerow([p["candidate"], _fmt(p["success_rate"]), _fmt(p["best_so_far"]), _fmt(p["wall_time"]),
                        *(_fmt(p["weights"][n]) for n in names)])
        return buf.getvalue()


def sample_weights(search_space: dict, budget: int, seed: int) -> list[dict]:
    """Log-uniform draws; the first k draws do not depend on ``budget``."""
    if budget < 1:
        raise InvalidInputError("budget must be at least 1")
    names = sorted(search_space)
    for n in names:
        lo, hi = search_space[n]
        if not 0 < lo <= hi:
            raise InvalidInputError(f"search range for {n!r} must satisfy 0 < lo <= hi")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 104729]))
    out = []
    for _ in range(budget):
        u = rng.random(len(names))
        out.append({n: float(math.exp(math.log(search_space[n][0]) + u[i] * (math.log(search_space[n][1]) -
                                                                             math.log(search_space[n][0]))))
                    for i, n in enumerate(names)})
    return out


def evaluate_weights(cfg: TaskConfig, weights: dict, trials: int, mode: str = "hierarchical",
                     cem: CemConfig | None = None, loop: LoopConfig | None = None, base_seed: int = 0,
                     workers: int = 1) -> float:
    cfg = cfg.merged({"weights": weights})
    jobs = [Trial(cfg, mode, base_seed + i, cem or CemConfig(), loop or LoopConfig()) for i in range(trials)]
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run_trial, jobs))
    else:
        results = [run_trial(j) for j in jobs]
    return sum(r.outcome == Outcome.SUCCESS for r in results) / trials


def tune_weights(task_id: str, budget: int, trials: int, seed: int = 0, search_space: dict | None = None,
                 out_csv=None, cem: CemConfig | None = None, loop: LoopConfig | None = None,
                 base_seed: int = 0, workers: int = 1, overrides: dict | None = None) -> TuneResult:
    """Seeded random search over cost weights, tracking the best success rate so far."""
    cfg = load_task_config(task_id).merged(overrides)
    space = cfg.search_space if search_space is None else search_space
    if not space:
        raise ConfigError(f"task {task_id!r} has no search space")
    candidates = sample_weights(space, budget, seed)
    curve = []
    best, best_w = -1.0, None
    t0 = time.perf_counter()
    for i, w in enumerate(candidates):
        rate = evaluate_weights(cfg, w, trials, cem=cem, loop=loop, base_seed=base_seed, workers=workers)
        if rate > best:
            best, best_w = rate, w
        curve.append({"candidate": i, "success_rate": rate, "best_so_far": best,
                      "wall_time": time.perf_counter() - t0, "weights": w})
    result = TuneResult(dict(best_w), best, curve)
    if out_csv is not None:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        Path(out_csv).write_text(result.to_csv())
    return result


def print_task(task_id: str) -> str:
    """Resolved term listing with weights and constants."""
    if task_id not in TASK_IDS:
        raise InvalidInputError(f"unknown task id {task_id!r}; valid ids: {', '.join(TASK_IDS)}")
    cfg = load_task_config(task_id)
    cost = assemble_task_cost(task_id)
    lines = cost.describe()
    if cfg.constants:
        lines.append("constants: " + ", ".join(f"{k}={v}" for k, v in sorted(cfg.constants.items())))
    return "\n".join(lines)
