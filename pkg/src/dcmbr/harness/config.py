"""Experiment configuration, loadable from a TOML file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import tomli

from ..errors import ConfigError

EXPERIMENTS = (
    "quality-vs-lambda",
    "rank-histogram",
    "topn-quality",
    "entropy-correlation",
    "n-sweep",
    "temp-grid",
    "utility-grid",
    "collapse",
)

# per-experiment overrides of the generic defaults below
EXPERIMENT_DEFAULTS: dict[str, dict] = {
    "entropy-correlation": {"n_seeds": 5},
    "n-sweep": {
        "lambdas": (0.1, 0.0),
        "temperatures": (0.25, 0.5, 0.75, 1.0),
        "n_values": (5, 10, 25, 50),
        "n_seeds": 3,
    },
    "temp-grid": {
        "lambdas": (0.1,),
        "temperatures": (0.2, 0.4, 0.6, 0.8, 1.0, 1.2),
        "n_seeds": 5,
    },
    "utility-grid": {"lambdas": (0.1,), "n_seeds": 3},
    "collapse": {"lambdas": (0.0, 0.1, 0.2, 0.3)},
}

_TUPLE_FIELDS = ("lambdas", "temperatures", "n_values", "beam_widths", "rank_edges", "lengths")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    # task: a TaskSpec file, or the synthetic generator parameters below
    task_file: str | None = None
    vocab_size: int = 12
    markov_order: int = 1
    max_len: int = 12
    noise: float = 0.1
    task_seed: int = 0
    n_sources: int = 20
    # sweep grids
    lambdas: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
    temperatures: tuple[float, ...] = (0.5, 1.0, 1.5)
    n_values: tuple[int, ...] = (5, 10, 25, 50)
    n_seeds: int = 10
    seed: int = 0
    # MBR template
    n: int = 10
    dc_temperature: float = 0.5
    fixed_t_ref: float = 1.0
    fixed_t_hyp: float = 0.5
    utility: str = "chrf"
    metric: str = "chrf"
    # other decoders and analyses
    beam_widths: tuple[int, ...] = (1, 5)
    topn: int = 20
    rank_edges: tuple[int, ...] = (0, 1, 2, 5)
    rank_perturb: float = 0.5
    lengths: tuple[int, ...] = (10, 20, 30)
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for name in _TUPLE_FIELDS:
            value = tuple(getattr(self, name))
            object.__setattr__(self, name, value)
        for name in ("lambdas", "temperatures", "n_values", "beam_widths", "lengths"):
            if not getattr(self, name):
                raise ConfigError(f"grid {name!r} is empty")
        if self.n_seeds < 1 or self.n < 1 or self.workers < 1:
            raise ConfigError("n_seeds, n and workers must be positive")
        if any(t <= 0 for t in self.temperatures) or self.dc_temperature <= 0:
            raise ConfigError("temperatures must be positive")
        if self.task_file is not None and not Path(self.task_file).is_file():
            raise ConfigError(f"task file {self.task_file!r} does not exist")

    @classmethod
    def for_experiment(cls, experiment: str, **overrides) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
        values = dict(EXPERIMENT_DEFAULTS.get(experiment, {}))
        values.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(experiment=experiment, **values)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def read_config_file(path) -> dict:
    try:
        return tomli.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path!r} not found") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path, experiment: str | None = None, **overrides) -> ExperimentConfig:
    """Config from a TOML file; ``overrides`` that are not ``None`` win."""
    values = read_config_file(path)
    experiment = experiment or values.pop("experiment", None)
    values.pop("experiment", None)
    if experiment is None:
        raise ConfigError("no experiment id given")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.for_experiment(experiment, **values)
