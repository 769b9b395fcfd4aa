"""Run configuration: YAML in, validated dataclasses out, and back.

Every section is a dataclass.  Loading walks the dataclass fields, so an
unknown key or a wrongly typed value is reported with its dotted key path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import yaml

SCHEMA_VERSION = 1
EXPERIMENTS = ("phase-scaling", "gate-design", "benchmark", "robustness", "compare")
OPTIMIZERS = ("de", "nr-de", "sussade", "pso", "hill-climb")


class ConfigError(ValueError):
    """Invalid or unreadable configuration; ``path`` is the dotted key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class DeSection:
    population_size: int = 30
    mutation_rate: float = 0.5
    crossover_rate: float = 0.9
    init_fraction: float = 1.0


@dataclass
class NoiseSection:
    init_samples: int = 2
    per_iteration_samples: int = 1
    final_samples: int = 10


@dataclass
class SussadeSection:
    F_l: float = 0.1
    F_u: float = 0.9
    kappa1: float = 0.1
    kappa2: float = 0.1
    switching_rate: float = 0.3
    subspace_size: Optional[int] = None


@dataclass
class PsoSection:
    population_size: int = 30
    inertia: float = 0.729
    c1: float = 1.494
    c2: float = 1.494
    init_velocity: float = 0.1


@dataclass
class HillClimbSection:
    step_sigma: float = 0.1


@dataclass
class OptimizerSection:
    name: str = "nr-de"
    de: DeSection = field(default_factory=DeSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    sussade: SussadeSection = field(default_factory=SussadeSection)
    pso: PsoSection = field(default_factory=PsoSection)
    hill_climb: HillClimbSection = field(default_factory=HillClimbSection)


@dataclass
class PhaseSection:
    N_values: list[int] = field(default_factory=lambda: list(range(4, 21, 2)))
    sigma: float = 0.0
    eta: float = 0.0
    # false: policies are trained without loss and scored with eta
    train_with_loss: bool = False
    # training phases per fitness sample; null means 10 N^2
    K: Optional[int] = None
    # iterations at N: min(iterations_cap, iterations + iterations_per_N * N)
    iterations: int = 0
    iterations_per_N: int = 20
    iterations_cap: int = 500
    # equal-budget comparisons cap evaluations per N instead
    max_evaluations: Optional[int] = None
    # trials used to score a finished policy, as a multiple of 10 N^2
    score_trials_factor: int = 10
    switch_over_N: Optional[int] = 10
    retry_cap: int = 20
    confidence: float = 0.98
    # random-policy baseline is written when > 0
    baseline_policies: int = 0

    def iterations_at(self, N: int) -> int:
        return min(self.iterations_cap, self.iterations + self.iterations_per_N * N)


@dataclass
class GateSection:
    n_qubits: int = 3
    target: str = "toffoli"
    T: int = 27
    dt: float = 1.0
    amplitude_bound: float = 3.141592653589793
    coupling: float = 2 * 3.141592653589793 * 0.05
    detunings: list[float] = field(
        default_factory=lambda: [2 * 3.141592653589793 * d for d in (0.10, 0.13, 0.07)]
    )
    filter_sigma: float = 1.0
    max_evaluations: int = 100_000
    repeats: int = 1


@dataclass
class RobustnessSection:
    # pulse CSV to scan; relative paths resolve against the config file
    pulses: Optional[str] = None
    grid: list[float] = field(default_factory=lambda: [0.0, 0.005, 0.01, 0.02, 0.04, 0.08])
    trials: int = 200
    filter_sigma: float = 1.0


@dataclass
class BenchmarkSection:
    functions: list[str] = field(default_factory=lambda: ["sphere", "rastrigin"])
    dimension: int = 30
    max_evaluations: int = 300_000
    noise_sigma: float = 0.0
    optimizers: list[str] = field(default_factory=lambda: ["de", "sussade"])
    repeats: int = 1


@dataclass
class CompareSection:
    optimizers: list[str] = field(default_factory=lambda: ["de", "pso", "hill-climb"])


@dataclass
class RunConfig:
    experiment: str
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "runs/default"
    workers: int = 1
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    phase: PhaseSection = field(default_factory=PhaseSection)
    gate: GateSection = field(default_factory=GateSection)
    robustness: RobustnessSection = field(default_factory=RobustnessSection)
    benchmark: BenchmarkSection = field(default_factory=BenchmarkSection)
    compare: CompareSection = field(default_factory=CompareSection)
    # directory of the source file, used to resolve relative artifact paths
    base_dir: Optional[str] = field(default=None, metadata={"serialize": False})

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {self.schema_version}, expected {SCHEMA_VERSION}")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.optimizer.name not in OPTIMIZERS:
            raise ConfigError("optimizer.name", f"unknown optimizer {self.optimizer.name!r}")
        for i, name in enumerate(self.compare.optimizers):
            if name not in OPTIMIZERS:
                raise ConfigError(f"compare.optimizers[{i}]", f"unknown optimizer {name!r}")
        for i, name in enumerate(self.benchmark.optimizers):
            if name not in OPTIMIZERS:
                raise ConfigError(f"benchmark.optimizers[{i}]", f"unknown optimizer {name!r}")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.optimizer.de.population_size < 4:
            raise ConfigError("optimizer.de.population_size", "must be >= 4")
        ph = self.phase
        if not ph.N_values or any(n < 1 for n in ph.N_values):
            raise ConfigError("phase.N_values", "need at least one N >= 1")
        if ph.N_values != sorted(set(ph.N_values)):
            raise ConfigError("phase.N_values", "must be strictly ascending")
        if ph.sigma < 0:
            raise ConfigError("phase.sigma", "must be >= 0")
        if not 0 <= ph.eta < 1:
            raise ConfigError("phase.eta", "must lie in [0, 1)")
        if ph.K is not None and ph.K < 1:
            raise ConfigError("phase.K", "must be >= 1")
        if not 0 < ph.confidence < 1:
            raise ConfigError("phase.confidence", "must lie in (0, 1)")
        if ph.retry_cap < 1:
            raise ConfigError("phase.retry_cap", "must be >= 1")
        if ph.switch_over_N is not None:
            before = [n for n in ph.N_values if n < ph.switch_over_N]
            if ph.switch_over_N <= ph.N_values[-1] and len(before) < 3:
                raise ConfigError("phase.switch_over_N", "accept-reject needs at least 3 N values below the switch-over")
        g = self.gate
        if g.target != "toffoli" or g.n_qubits != 3:
            raise ConfigError("gate.target", "only the 3-qubit toffoli target is available")
        if len(g.detunings) != g.n_qubits:
            raise ConfigError("gate.detunings", f"need {g.n_qubits} values")
        if g.T < 1 or g.dt <= 0 or g.amplitude_bound <= 0 or g.filter_sigma < 0:
            raise ConfigError("gate", "T >= 1, dt > 0, amplitude_bound > 0 and filter_sigma >= 0 required")
        if self.experiment == "robustness" and not self.robustness.pulses:
            raise ConfigError("robustness.pulses", "required for a robustness run")
        if self.robustness.trials < 1:
            raise ConfigError("robustness.trials", "must be >= 1")
        if any(d < 0 for d in self.robustness.grid):
            raise ConfigError("robustness.grid", "values must be >= 0")
        from ..optim.benchmarks import BENCHMARKS

        for i, name in enumerate(self.benchmark.functions):
            if name not in BENCHMARKS:
                raise ConfigError(f"benchmark.functions[{i}]", f"unknown function {name!r}")

    def to_dict(self) -> dict:
        return _to_plain(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _to_plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {
            f.name: _to_plain(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
            if f.metadata.get("serialize", True)
        }
    if isinstance(obj, list):
        return [_to_plain(v) for v in obj]
    return obj


def _coerce(value: Any, tp: Any, path: str) -> Any:
    origin = typing.get_origin(tp)
    if origin in (Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(value, inner, path)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        (inner,) = typing.get_args(tp)
        return [_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(path, f"unsupported field type {tp}")


def _build(cls: type, data: Any, path: str = "") -> Any:
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.metadata.get("serialize", True)}
    kwargs = {}
    for key, value in data.items():
        key_path = f"{path}.{key}" if path else str(key)
        if key not in fields:
            raise ConfigError(key_path, "unknown key")
        kwargs[key] = _coerce(value, hints[key], key_path)
    for name, f in fields.items():
        if name not in kwargs and f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(f"{path}.{name}" if path else name, "missing required key")
    return cls(**kwargs)


def config_from_dict(data: dict, base_dir: Optional[str] = None) -> RunConfig:
    config = _build(RunConfig, data)
    config.base_dir = base_dir
    config.validate()
    return config


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{path} is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    return config_from_dict(data, base_dir=str(path.resolve().parent))


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
