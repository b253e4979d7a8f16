"""Study configuration, built-in presets and canonical JSON round-tripping."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .diagnostics import KINDS, GofConfig

MODELS = ("normal", "gk", "ricker", "returns")
GRID_PARAM = {"normal": "sigma", "gk": "rho", "ricker": "k_break", "returns": "theta1"}


@dataclass
class AbcSettings:
    N: int = 50_000
    alpha: float = 0.01
    weights: list[float] | None = None


@dataclass
class StudyConfig:
    """One Monte Carlo study.

    ``grid`` holds the misspecification parameter of the true process
    (sigma for normal, rho for gk, k_break for ricker, theta1 for returns).
    ``truth`` overrides the remaining true-process constants and
    ``prior`` optionally replaces the model's default uniform prior as
    ``{"lows": [...], "highs": [...]}``.
    """

    model: str = "normal"
    grid: list[float] = field(default_factory=lambda: [1.0])
    sample_sizes: list[int] = field(default_factory=lambda: [100])
    replications: int = 100
    abc: AbcSettings = field(default_factory=AbcSettings)
    gof: GofConfig = field(default_factory=GofConfig)
    tests: list[str] = field(default_factory=lambda: list(KINDS))
    R: int = 100
    inner_N: int = 10_000
    inner_alpha: float = 0.01
    sim_gof_scope: str = "accepted"
    nominal_level: float = 0.05
    seed: int = 0
    truth: dict[str, Any] = field(default_factory=dict)
    prior: dict[str, list[float]] | None = None
    fast_summaries: bool = True
    theta_hat_adjusted: bool = False
    pp_use_adjusted: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        if not self.grid or not self.sample_sizes:
            raise ValueError("grid and sample_sizes must be non-empty")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        bad = [t for t in self.tests if t not in KINDS]
        if bad:
            raise ValueError(f"unknown tests {bad}; choose from {KINDS}")
        if not 0 < self.nominal_level < 1:
            raise ValueError("nominal_level must lie in (0, 1)")
        if self.gof.alpha_level != self.nominal_level:
            self.gof = GofConfig(**{**asdict(self.gof), "alpha_level": self.nominal_level})

    @property
    def grid_param(self) -> str:
        return GRID_PARAM[self.model]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StudyConfig":
        d = copy.deepcopy(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "abc" in d:
            d["abc"] = AbcSettings(**d["abc"])
        if "gof" in d:
            d["gof"] = GofConfig(**d["gof"])
        return cls(**d)


def _finite(obj: Any) -> Any:
    # JSON has no NaN/inf; emit null instead
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def canonical_json(obj: Any) -> str:
    """Sorted-key, two-space-indented JSON with non-finite floats as null."""
    return json.dumps(_finite(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


PRESETS: dict[str, dict[str, Any]] = {
    "normal": {
        "model": "normal",
        "grid": [0.8, 0.9, 1.0, 1.1, 1.2, 1.3],
        "sample_sizes": [100, 500, 1000],
        "replications": 100,
        "abc": {"N": 50_000, "alpha": 0.01},
        "gof": {"Nn": 10_000, "variance_source": "analytic"},
        "R": 100,
        "inner_N": 50_000,
        "inner_alpha": 0.01,
    },
    "gk": {
        "model": "gk",
        "grid": [0.0, 0.4, 0.8],
        "sample_sizes": [500, 1000],
        "replications": 50,
        "abc": {"N": 100_000, "alpha": 0.001},
        "gof": {"Nn": 10_000, "variance_source": "bootstrap", "B": 200},
        "R": 100,
        "inner_N": 10_000,
        "inner_alpha": 0.01,
    },
    "ricker": {
        "model": "ricker",
        "grid": [0.6, 0.7, 0.8, 0.9, 1.0],
        "sample_sizes": [250, 500, 1000],
        "replications": 50,
        "abc": {"N": 500_000, "alpha": 0.00025},
        "gof": {"Nn": 200_000, "variance_source": "bootstrap", "B": 200},
        "R": 100,
        "inner_N": 10_000,
        "inner_alpha": 0.01,
    },
    "returns": {
        "model": "returns",
        "grid": [0.2],
        "sample_sizes": [524],
        "replications": 1,
        "abc": {"N": 1_000_000, "alpha": 0.0001},
        "gof": {"Nn": 1_000_000, "variance_source": "bootstrap", "B": 200},
        "R": 100,
        "inner_N": 10_000,
        "inner_alpha": 0.01,
        "truth": {"a": 0.08, "b": 0.08, "g": -0.2, "k": 0.02},
    },
}


def preset(name: str, **overrides) -> StudyConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = copy.deepcopy(PRESETS[name])
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(d.get(key), dict):
            d[key] = {**d[key], **val}
        else:
            d[key] = val
    return StudyConfig.from_dict(d)


def load_config(path) -> StudyConfig:
    """Load a config file, or the resolved config inside a run manifest."""
    d = json.loads(Path(path).read_text())
    if "resolved_config" in d:
        d = d["resolved_config"]
    return StudyConfig.from_dict(d)
