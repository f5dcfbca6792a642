"""YAML config loading for task files and benchmark suites.

Errors carry the file and the 1-based line of the offending entry whenever the
YAML node is known.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigError

TASK_KEYS = {"task_id", "world", "kind", "weights", "constants", "time_limit", "layout", "world_params",
             "init", "goal", "search_space", "description"}


@dataclass(frozen=True)
class TaskConfig:
    task_id: str
    world: str | None = None
    kind: str | None = None
    weights: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    time_limit: float = 30.0
    layout: dict = field(default_factory=dict)
    world_params: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    goal: tuple = (0.0, 0.0)
    search_space: dict = field(default_factory=dict)
    description: str = ""

    def merged(self, overrides: dict | None) -> TaskConfig:
        """Shallow-merge each table of ``overrides`` into this config."""
        if not overrides:
            return self
        data = {k: getattr(self, k) for k in TASK_KEYS}
        for key, value in overrides.items():
            if key not in TASK_KEYS:
                raise ConfigError(f"unknown task override {key!r}")
            if isinstance(data[key], dict) and isinstance(value, dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return _task_from_mapping(data, None, None)


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    mapping = yaml.SafeLoader.construct_mapping(loader, node, deep=True)
    lines = {}
    for key_node, _ in node.value:
        lines[key_node.value] = key_node.start_mark.line + 1
    return _LineDict(mapping, lines, node.start_mark.line + 1)


class _LineDict(dict):
    """A dict remembering the source line of each key."""

    def __init__(self, data, lines, line):
        super().__init__(data)
        self.lines = lines
        self.line = line

    def line_of(self, key):
        return self.lines.get(key, self.line)


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def load_yaml(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    return parse_yaml(text, path)


def parse_yaml(text: str, path=None) -> dict:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(exc.problem or str(exc), path, mark.line + 1 if mark else None) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", path, 1)
    return data


def _line(data, key):
    return data.line_of(key) if isinstance(data, _LineDict) else None


def _task_from_mapping(data: dict, path, _unused) -> TaskConfig:
    unknown = [k for k in data if k not in TASK_KEYS]
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", path, _line(data, unknown[0]))
    if "task_id" not in data:
        raise ConfigError("missing 'task_id'", path, 1)
    for key in ("weights", "constants", "layout", "world_params", "init", "search_space"):
        if key in data and not isinstance(data[key], dict):
            raise ConfigError(f"{key!r} must be a mapping", path, _line(data, key))
    weights = data.get("weights", {}) or {}
    for name, value in weights.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"weight {name!r} must be a number", path, _line(weights, name))
    limit = data.get("time_limit", 30.0)
    if not isinstance(limit, (int, float)) or limit <= 0:
        raise ConfigError("time_limit must be a positive number", path, _line(data, "time_limit"))
    kind = data.get("kind")
    if kind not in (None, "move", "upright"):
        raise ConfigError(f"kind must be 'move' or 'upright', got {kind!r}", path, _line(data, "kind"))
    return TaskConfig(
        task_id=str(data["task_id"]),
        world=data.get("world"),
        kind=kind,
        weights={k: float(v) for k, v in weights.items()},
        constants=dict(data.get("constants", {}) or {}),
        time_limit=float(limit),
        layout=dict(data.get("layout", {}) or {}),
        world_params=dict(data.get("world_params", {}) or {}),
        init=dict(data.get("init", {}) or {}),
        goal=tuple(float(v) for v in data.get("goal", (0.0, 0.0))),
        search_space={k: tuple(float(x) for x in v) for k, v in (data.get("search_space", {}) or {}).items()},
        description=str(data.get("description", "")),
    )


def load_task_file(path) -> TaskConfig:
    return _task_from_mapping(load_yaml(path), Path(path), None)


@lru_cache(maxsize=None)
def load_task_config(task_id: str) -> TaskConfig:
    """Packaged default config for ``task_id``."""
    ref = resources.files("hiermpc") / "configs" / "tasks" / f"{task_id}.yaml"
    if not ref.is_file():
        raise ConfigError(f"no packaged config for task {task_id!r}")
    with resources.as_file(ref) as path:
        cfg = load_task_file(path)
    if cfg.task_id != task_id:
        raise ConfigError(f"file declares task_id {cfg.task_id!r}", path, 1)
    return cfg
