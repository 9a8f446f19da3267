"""Run configuration: training hyper-parameters plus the laplacian menu.

Config files are JSON objects with optional sections ``train``, ``menu``,
``data`` and ``output``; see README for the grammar. Unknown keys are an
error so that typos do not silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ParameterError, UsageError
from .graph import LaplacianSpec
from .multilap import ACTIVATIONS
from .pooling import POOLING_MODES

# Learning-rate schedules used for the two benchmark protocols.
SCHEDULES = {
    "ucf": {"learning_rate": 0.0006, "decay_factor": 0.1, "decay_epoch": 100, "epochs": 150},
    "sbu": {"learning_rate": 0.7, "decay_factor": 0.1, "decay_epoch": 100, "epochs": 40},
}

DEFAULT_MENU = (
    LaplacianSpec("unnormalized", "binary", 1),
    LaplacianSpec("normalized", "binary", 1),
    LaplacianSpec("normalized", "binary_gaussian", 1, 1.0),
)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 30
    learning_rate: float = 0.01
    decay_factor: float = 0.1
    decay_epoch: int = 100
    momentum: float = 0.0
    cheb_order: int = 4
    conv_filters: tuple[int, ...] = (32,)
    multilap_depth: int = 2
    multilap_hidden: int = 4
    activation: str = "leaky_softplus"
    leak: float = 0.01
    pooling: str = "expand_gp"
    radius: int = 1
    single_label: bool = False
    readout_mean: bool = False
    max_nodes: int = 32
    rescale_after_multilap: bool = True
    rebinarize: bool = False
    seed: int = 0
    record_wall_time: bool = False

    def __post_init__(self):
        self.conv_filters = tuple(int(f) for f in self.conv_filters)
        self.validate()

    def validate(self) -> None:
        positive = ("epochs", "batch_size", "decay_epoch", "cheb_order", "multilap_depth",
                    "multilap_hidden", "radius", "max_nodes")
        for name in positive:
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"train.{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ParameterError("train.learning_rate must be positive")
        if not 0 < self.decay_factor <= 1:
            raise ParameterError("train.decay_factor must lie in (0, 1]")
        if not 0 <= self.momentum < 1:
            raise ParameterError("train.momentum must lie in [0, 1)")
        if not self.conv_filters or min(self.conv_filters) < 1:
            raise ParameterError("train.conv_filters must list positive widths")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"train.activation must be one of {ACTIVATIONS}")
        if self.pooling not in POOLING_MODES:
            raise ParameterError(f"train.pooling must be one of {POOLING_MODES}")
        if not 0 <= self.leak < 1:
            raise ParameterError("train.leak must lie in [0, 1)")

    def learning_rate_at(self, epoch: int) -> float:
        """Step decay: multiply by ``decay_factor`` every ``decay_epoch`` epochs (0-based)."""
        return self.learning_rate * self.decay_factor ** (epoch // self.decay_epoch)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        schedule = d.pop("schedule", None)
        base: dict[str, Any] = {}
        if schedule is not None:
            if schedule not in SCHEDULES:
                raise ParameterError(f"unknown schedule {schedule!r}; choose from {sorted(SCHEDULES)}")
            base.update(SCHEDULES[schedule])
        base.update(d)
        _check_keys(cls, base, "train")
        return cls(**base)


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    menu: tuple[LaplacianSpec, ...] = DEFAULT_MENU
    data: dict[str, Any] = field(default_factory=lambda: {"synthetic": {}})
    output: str = "runs/default"

    def __post_init__(self):
        if not self.menu:
            raise ParameterError("laplacian menu is empty")

    def to_dict(self) -> dict:
        return {
            "train": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.train).items()},
            "menu": [s.to_dict() for s in self.menu],
            "data": self.data,
            "output": self.output,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - {"train", "menu", "data", "output"}
        if unknown:
            raise ParameterError(f"unknown config sections: {sorted(unknown)}")
        train = TrainConfig.from_dict(d.get("train", {}))
        menu = tuple(parse_menu(d["menu"])) if "menu" in d else DEFAULT_MENU
        return cls(train, menu, dict(d.get("data", {"synthetic": {}})), d.get("output", "runs/default"))

    def with_train(self, **overrides) -> "RunConfig":
        return replace(self, train=replace(self.train, **overrides))


def parse_menu(entries: list) -> list[LaplacianSpec]:
    menu = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict):
            raise ParameterError(f"menu[{i}] must be an object")
        _check_keys(LaplacianSpec, e, f"menu[{i}]")
        menu.append(LaplacianSpec(**e))
    if not menu:
        raise UsageError("laplacian menu is empty")
    return menu


def table_menu(families=("unnormalized", "normalized", "random_walk"), powers=(1, 4, 32),
               multipliers=tuple(10.0 ** e for e in range(-6, 7))) -> list[LaplacianSpec]:
    """Full grid of binary and gaussian-weighted laplacians."""
    menu = []
    for fam in families:
        for k in powers:
            menu.append(LaplacianSpec(fam, "binary", k))
            menu.extend(LaplacianSpec(fam, "binary_gaussian", k, m) for m in multipliers)
    return menu


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(raw)


def _check_keys(cls, d: dict, where: str) -> None:
    allowed = {f.name for f in fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise ParameterError(f"unknown keys in {where}: {sorted(unknown)}")
