"""Experiment configuration and the declarative config file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..ga import GAConfig
from ..narx_core import DictionaryConfig, FitnessSpec
from ..swarm2d import SwarmConfig
from ..systems import SYSTEMS, BenchmarkSystem, get_system

ALGORITHMS = ("2dupso", "ga")
DATA_MODES = ("per_run", "fixed")
STUDY_FITNESS = ("BIC", "AIC(2)", "AIC(8)", "AIC(64)", "AIC(256)")


def _default_fitness():
    return [FitnessSpec.parse(f) for f in STUDY_FITNESS]


@dataclass
class ExperimentConfig:
    """Factorial sweep: systems x algorithms x fitness x SNR x runs.

    ``snr_db`` entries of ``None`` mean noise-free data. ``dictionary``
    optionally replaces every system's search dictionary (the system's own
    terms must fit in it); ``n_samples`` and ``validation_fraction`` control
    the synthetic record.
    """

    systems: list[str] = field(default_factory=lambda: list(SYSTEMS))
    algorithms: list[str] = field(default_factory=lambda: ["2dupso", "ga"])
    fitness: list[FitnessSpec] = field(default_factory=_default_fitness)
    snr_db: list[float | None] = field(default_factory=lambda: [50.0, 40.0, 30.0])
    runs: int = 40
    budget: int = 6000
    base_seed: int = 0
    data_mode: str = "per_run"
    output_dir: str = "results"
    n_samples: int = 2000
    validation_fraction: float = 0.3
    amplitude: float = 1.0
    dictionary: DictionaryConfig | None = None
    swarm: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)

    def __post_init__(self):
        self.systems = [get_system(s).name for s in self.systems]
        self.algorithms = [a.lower() for a in self.algorithms]
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        self.fitness = [FitnessSpec.parse(f) for f in self.fitness]
        self.snr_db = [None if s is None or str(s).lower() in ("none", "inf") else float(s)
                       for s in self.snr_db]
        if isinstance(self.dictionary, dict):
            self.dictionary = DictionaryConfig(**self.dictionary)
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.data_mode not in DATA_MODES:
            raise ValueError(f"data_mode must be one of {DATA_MODES}")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")
        minimum = max(self.swarm_config().ps if "2dupso" in self.algorithms else 1,
                      self.ga_config().population if "ga" in self.algorithms else 1)
        if self.budget < minimum:
            raise ValueError(f"budget must be at least {minimum}")
        for name in self.systems:
            self.system(name)  # validates the dictionary override

    def swarm_config(self) -> SwarmConfig:
        return SwarmConfig(**{**self.swarm, "budget": self.budget})

    def ga_config(self) -> GAConfig:
        return GAConfig(**{**self.ga, "budget": self.budget})

    def system(self, name: str) -> BenchmarkSystem:
        sys_ = get_system(name)
        if self.dictionary is None:
            return sys_
        sys_ = dataclasses.replace(sys_, config=self.dictionary)
        try:
            sys_.true_structure
        except ValueError:
            raise ValueError(f"{name} terms do not fit in dictionary {self.dictionary}") from None
        return sys_

    def to_dict(self) -> dict:
        return {
            "systems": list(self.systems),
            "algorithms": list(self.algorithms),
            "fitness": [f.label for f in self.fitness],
            "snr_db": list(self.snr_db),
            "runs": self.runs,
            "budget": self.budget,
            "base_seed": self.base_seed,
            "data_mode": self.data_mode,
            "output_dir": self.output_dir,
            "n_samples": self.n_samples,
            "validation_fraction": self.validation_fraction,
            "amplitude": self.amplitude,
            "dictionary": None if self.dictionary is None else dataclasses.asdict(self.dictionary),
            "swarm": dict(self.swarm),
            "ga": dict(self.ga),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping of config keys")
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
