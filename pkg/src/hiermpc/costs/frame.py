"""Named site frames that cost terms are evaluated against.

All entries may carry leading batch dimensions (e.g. one row per rollout step),
so a single term evaluation covers a whole trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SiteResolutionError

WORLD_AXES = {
    "world_x": np.array([1.0, 0.0, 0.0]),
    "world_y": np.array([0.0, 1.0, 0.0]),
    "world_z": np.array([0.0, 0.0, 1.0]),
}


class LazyTable(dict):
    """A dict whose entries may be computed on first access.

    ``factories`` maps a name to a zero-argument callable. A callable may return
    a dict to fill several related entries at once.
    """

    def __init__(self, values=None, factories=None):
        super().__init__(values or {})
        self.factories = dict(factories or {})

    def __missing__(self, key):
        fn = self.factories.get(key)
        if fn is None:
            raise KeyError(key)
        value = fn()
        if isinstance(value, dict):
            for k, v in value.items():
                dict.setdefault(self, k, v)
            return dict.__getitem__(self, key)
        self[key] = value
        return value

    def __contains__(self, key):
        return dict.__contains__(self, key) or key in self.factories

    def get(self, key, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def materialize(self) -> dict:
        for key in list(self.factories):
            if not dict.__contains__(self, key):
                self[key]
        return dict(dict.items(self))

    def items(self):
        return self.materialize().items()

    def keys(self):
        return self.materialize().keys()

    def values(self):
        return self.materialize().values()

    def __iter__(self):
        return iter(self.materialize())

    def __len__(self):
        return len(set(dict.keys(self)) | set(self.factories))

    def copy(self) -> LazyTable:
        return LazyTable(dict(dict.items(self)), self.factories)


def _copy(table):
    return table.copy() if isinstance(table, LazyTable) else dict(table)


@dataclass
class SiteFrame:
    sites: dict = field(default_factory=dict)
    axes: dict = field(default_factory=dict)
    vectors: dict = field(default_factory=dict)
    quats: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, axis in WORLD_AXES.items():
            self.axes.setdefault(name, axis)

    def site(self, name: str) -> np.ndarray:
        return _lookup(self.sites, name)

    def axis(self, name: str) -> np.ndarray:
        return _lookup(self.axes, name)

    def vector(self, name: str) -> np.ndarray:
        return _lookup(self.vectors, name)

    def quat(self, name: str) -> np.ndarray:
        return _lookup(self.quats, name)

    def scalar(self, name: str) -> np.ndarray:
        return _lookup(self.scalars, name)

    def copy(self) -> SiteFrame:
        return SiteFrame(_copy(self.sites), _copy(self.axes), _copy(self.vectors), _copy(self.quats),
                         _copy(self.scalars))

    def with_sites(self, **sites) -> SiteFrame:
        out = self.copy()
        out.sites.update(sites)
        return out

    def batch_shape(self) -> tuple:
        for table in (self.sites, self.vectors, self.quats):
            for name in table:
                return np.shape(table[name])[:-1]
        return ()


def _lookup(table: dict, name: str) -> np.ndarray:
    try:
        return table[name]
    except KeyError:
        raise SiteResolutionError(name) from None


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def canonical_frame() -> SiteFrame:
    """Synthetic frame carrying every site name used by the task library."""
    rng = np.random.default_rng(7)
    names = [
        "object", "goal", "gripper", "torso", "pelvis", "fr_foot", "fl_foot",
        "left_palm", "right_palm", "handle", "door", "grasp_L", "grasp_R",
        "approach_L", "approach_mid", "approach_R", "bottom",
    ]
    sites = {name: rng.uniform(-1.0, 1.0, 3) for name in names}
    sites["goal"][2] = sites["object"][2]
    axes = {}
    for prefix in ("object", "gripper", "robot", "bottom"):
        # a random proper rotation for each body
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        if np.linalg.det(q) < 0:
            q[:, 2] = -q[:, 2]
        for i, name in enumerate("xyz"):
            axes[f"{prefix}_{name}"] = _unit(q[:, i])
    quat = _unit(rng.normal(size=4))
    return SiteFrame(
        sites=sites,
        axes=axes,
        vectors={
            "object_vel": rng.normal(size=3),
            "object_angvel": rng.normal(size=3),
            "bottom_vel": rng.normal(size=3),
            "bottom_angvel": rng.normal(size=3),
            "base_vel": rng.normal(size=3),
            "arm_q": rng.normal(size=6),
            "arm_q_default": np.zeros(6),
        },
        quats={"object": quat, "upright": np.array([1.0, 0.0, 0.0, 0.0])},
        scalars={
            "torso_height": np.float64(0.5),
            "torso_pitch": np.float64(0.05),
            "torso_roll": np.float64(-0.02),
            "fallen": np.float64(0.0),
            "gripper_pos": np.float64(-0.2),
            "gripper_cmd": np.float64(0.0),
            "gripper_close": np.float64(0.0),
            "object_tilt": np.float64(0.1),
        },
    )
