"""Declarative experiment configuration stored as TOML."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib
import tomli_w

EXPERIMENTS = (
    "ent-vs-growth",
    "entropy-drop",
    "g0-diagnostics",
    "tail-entropy",
    "time-scaling",
    "usc-probe",
)

DESCRIPTIONS = {
    "ent-vs-growth": "separated-set entropy of time-one maps against max(chi_u, chi_s)",
    "entropy-drop": "chi_u of the time-changed family across r; the jump at r = 0",
    "g0-diagnostics": "critical points, homoclinic loop, conservation and zero entropy of g0",
    "tail-entropy": "separated-set growth inside two-sided dynamical balls on center plaques",
    "time-scaling": "growth per iterate of phi_t against t times growth per iterate of phi_1",
    "usc-probe": "chi_u under small perturbations of the time-change profile",
}

_GROWTH = {"seeds": 32, "horizon": 15.0, "dt": 1.0, "radius": 0.01, "spacing": 1e-3,
           "cap": 20_000, "rescale": 4, "periods": 2}

DEFAULTS: dict[str, dict[str, Any]] = {
    "ent-vs-growth": {
        "system": {"systems": ["cat-map", "cat-suspension", "family-r0"], "c0": 1.0, "c1": 0.5},
        "estimator": {
            "growth": dict(_GROWTH),
            "entropy": {
                "cat-map": {"grid": [300, 300], "eps": [0.05], "n": [2, 3, 4, 5, 6, 7, 8, 9, 10]},
                # flows are sampled on a dense base patch times whole roof and circle axes
                "cat-suspension": {"grid": [300, 300, 2], "box": [[0.0, 0.1], [0.0, 0.1], [0.0, 1.0]],
                                   "eps": [0.02], "n": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]},
                "family-r0": {"grid": [300, 300, 2, 4], "box": [[0.0, 0.1], [0.0, 0.1], [0.0, 1.0], [0.0, 1.0]],
                              "eps": [0.02], "n": [1, 2, 3, 4, 5, 6, 7, 8]},
                "saturation": 0.5,
                "residual_threshold": 0.15,
            },
        },
        "tolerance": {"entropy_vs_analytic": 0.10, "entropy_vs_growth": 0.15, "chi_vs_analytic": 0.06,
                      "tangent_vs_curve": 0.05},
    },
    "entropy-drop": {
        "system": {"r": [0.0, 0.05, 0.1, 0.2], "c0": 1.0, "c1": 0.5},
        "estimator": {"growth": dict(_GROWTH)},
        "tolerance": {"chi_vs_analytic": 0.06, "min_gap": 0.35},
    },
    "g0-diagnostics": {
        "system": {"eps1": 2e-4, "eps2": 0.01, "delta": 0.1, "bump_radius": 0.04, "cutoff": 0.09},
        "estimator": {
            "integrator": {"step": 1e-3, "entropy_step": 1e-2, "conservation_time": 100.0,
                           "conservation_points": 16, "area_points": 1000},
            "entropy": {"grid": [200, 200], "eps": [0.02], "n": [1, 3, 6, 9, 12, 15, 18, 21, 24, 27, 30],
                        "saturation": 0.5, "residual_threshold": 0.15},
            # dense cat patch times a g0 grid finer than eps; the cat factor uses the same patch
            "product": {"grid": [60, 60, 4, 24], "box": [[0.0, 0.06], [0.0, 0.06], [-0.1, 0.1], [0.0, 1.0]],
                        "factor_grid": [60, 60], "eps": [0.05], "n": [1, 2, 3, 4, 5, 6, 7, 8, 9]},
        },
        "tolerance": {"g0_entropy": 0.05, "area": 1e-6, "energy_drift": 1e-8, "newton_residual": 1e-8,
                      "homoclinic_return": 1e-5, "product_gap": 0.15},
    },
    "tail-entropy": {
        "system": {"systems": ["product-identity", "family-r"], "r": 0.1, "c0": 1.0, "c1": 0.5},
        "estimator": {"tail": {"centers": 16, "radius": 0.02, "n_ball": [5, 10, 15, 20], "horizon": 12,
                               "plaque_scale": 17.0, "resolution": 257}},
        "tolerance": {"tail_slope": 0.05, "monotone_slack": 0.01},
    },
    "time-scaling": {
        "system": {"systems": ["cat-suspension"], "t": [2.0], "r": 0.1, "c0": 1.0, "c1": 0.5},
        "estimator": {"growth": dict(_GROWTH, seeds=16, horizon=12.0)},
        "tolerance": {"discrepancy": 0.05, "discrepancy_family": 0.08},
    },
    "usc-probe": {
        "system": {"zeta": [0.0, 0.01, 0.05], "r": 0.0, "c0": 1.0, "c1": 0.5, "harmonic": 3, "phase": 0.7},
        "estimator": {"growth": dict(_GROWTH)},
        "tolerance": {"excess": 0.1},
    },
}

# documented sweep axes; each maps to the config entries it may address,
# tried in order, so one axis name works across experiments
SWEEP_AXES = {
    "r": (("system", "r"),),
    "eps": (("estimator", "entropy", "cat-map", "eps"), ("estimator", "entropy", "eps")),
    "grid": (("estimator", "entropy", "cat-map", "grid"), ("estimator", "entropy", "grid")),
    "T": (("estimator", "growth", "horizon"),),
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config entry {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a table")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ExperimentConfig:
    name: str
    seed: int = 0
    output: str = "runs"
    threads: int = 1
    system: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)

    @classmethod
    def default(cls, name: str, **kwargs) -> "ExperimentConfig":
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
        base = copy.deepcopy(DEFAULTS[name])
        cfg = cls(name=name, system=base["system"], estimator=base["estimator"], tolerance=base["tolerance"], **kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = copy.deepcopy(data)
        head = data.pop("experiment", None)
        if not isinstance(head, dict) or "name" not in head:
            raise ConfigError("config needs an [experiment] table with a name")
        name = head["name"]
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
        unknown = set(head) - {"name", "seed", "output", "threads"}
        if unknown:
            raise ConfigError(f"unknown [experiment] entries: {sorted(unknown)}")
        extra = set(data) - {"system", "estimator", "tolerance"}
        if extra:
            raise ConfigError(f"unknown tables: {sorted(extra)}")
        merged = _merge(DEFAULTS[name], {k: data[k] for k in ("system", "estimator", "tolerance") if k in data})
        cfg = cls(name=name, seed=int(head.get("seed", 0)), output=str(head.get("output", "runs")),
                  threads=int(head.get("threads", 1)), **merged)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "experiment": {"name": self.name, "seed": self.seed, "output": self.output, "threads": self.threads},
            "system": copy.deepcopy(self.system),
            "estimator": copy.deepcopy(self.estimator),
            "tolerance": copy.deepcopy(self.tolerance),
        }

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_toml(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_toml())

    def get(self, path: tuple[str, ...]):
        node = getattr(self, path[0])
        for key in path[1:]:
            node = node[key]
        return node

    def with_value(self, path: tuple[str, ...], value) -> "ExperimentConfig":
        data = self.to_dict()
        node = data[path[0]]
        for key in path[1:-1]:
            if key not in node:
                raise ConfigError(f"{'.'.join(path)} does not apply to {self.name}")
            node = node[key]
        if path[-1] not in node:
            raise ConfigError(f"{'.'.join(path)} does not apply to {self.name}")
        node[path[-1]] = value
        return ExperimentConfig.from_dict(data)

    def sweep_path(self, axis: str) -> tuple[str, ...]:
        """Config entry addressed by a sweep axis for this experiment."""
        if axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
        for path in SWEEP_AXES[axis]:
            try:
                self.get(path)
            except (KeyError, AttributeError, TypeError):
                continue
            return path
        raise ConfigError(f"sweep axis {axis!r} does not apply to {self.name}")

    def with_sweep_value(self, axis: str, value: float) -> "ExperimentConfig":
        """Copy of the config with one sweep value substituted.

        List-valued entries (r, eps) become single-element lists; a grid
        value is a per-axis resolution repeated over every grid axis.
        """
        path = self.sweep_path(axis)
        current = self.get(path)
        if axis == "grid":
            res = int(value)
            if res != value or res < 1:
                raise ConfigError("grid sweep values must be positive integers")
            new = [res] * len(current)
        elif isinstance(current, list):
            new = [float(value)]
        else:
            new = float(value)
        return self.with_value(path, new)

    def validate(self) -> None:
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        sysc = self.system
        for key in ("c0", "c1"):
            if key in sysc and not math.isfinite(sysc[key]):
                raise ConfigError(f"system.{key} must be finite")
        if "c0" in sysc and sysc["c0"] <= abs(sysc["c1"]):
            raise ConfigError("profile must be positive: need c0 > |c1|")
        rs = sysc.get("r", [])
        for r in rs if isinstance(rs, list) else [rs]:
            if not -1 < r < 1:
                raise ConfigError("r must lie in (-1, 1)")
        if "delta" in sysc:
            if not 0 < sysc["delta"] <= 0.5:
                raise ConfigError("delta must lie in (0, 0.5]")
            if not 0 < sysc["cutoff"] < 0.95 * sysc["delta"]:
                raise ConfigError("cutoff must lie in (0, 0.95 delta)")
        for z in sysc.get("zeta", []):
            if not 0 <= z < sysc.get("c0", 1.0) - abs(sysc.get("c1", 0.0)):
                raise ConfigError("zeta must be non-negative and keep the profile positive")
        for t in sysc.get("t", []):
            if t <= 0:
                raise ConfigError("time-scaling factors must be positive")
        growth = self.estimator.get("growth")
        if growth is not None:
            for key in ("seeds", "horizon", "dt", "radius", "spacing", "cap", "rescale", "periods"):
                if growth[key] <= 0:
                    raise ConfigError(f"estimator.growth.{key} must be positive")
            if growth["rescale"] < 2:
                raise ConfigError("estimator.growth.rescale must be >= 2")
        _check_grids(self.estimator, "estimator")
        for tol_key, tol in self.tolerance.items():
            if not (isinstance(tol, (int, float)) and tol >= 0):
                raise ConfigError(f"tolerance.{tol_key} must be a non-negative number")


def _check_grids(node: dict, where: str) -> None:
    """Grid resolutions are positive integers; boxes give lo < hi per grid axis."""
    for key, value in node.items():
        path = f"{where}.{key}"
        if isinstance(value, dict):
            _check_grids(value, path)
        elif key in ("grid", "factor_grid"):
            if not value or not all(isinstance(v, int) and v >= 1 for v in value):
                raise ConfigError(f"{path} must list positive integer resolutions")
        elif key == "box":
            if len(value) != len(node.get("grid", value)):
                raise ConfigError(f"{path} needs one range per grid axis")
            if not all(len(b) == 2 and b[0] < b[1] for b in value):
                raise ConfigError(f"{path} ranges must be [lo, hi] with lo < hi")
