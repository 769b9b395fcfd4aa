"""Shared optimizer types, differential-evolution primitives and evaluation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from ..rng import RngStream


class ConfigurationError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


class EvaluationError(ValueError):
    pass


@dataclass
class Bounds:
    lower: np.ndarray
    upper: np.ndarray
    periodic: np.ndarray

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        self.periodic = np.broadcast_to(
            np.asarray(self.periodic, dtype=bool), self.lower.shape
        ).copy()
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ConfigurationError("lower and upper must be vectors of equal length")
        if not np.all(self.lower < self.upper):
            raise ConfigurationError("every lower bound must be below its upper bound")

    @classmethod
    def box(cls, dim: int, lower: float, upper: float, periodic: bool = False) -> "Bounds":
        return cls(np.full(dim, lower), np.full(dim, upper), np.full(dim, periodic))

    @classmethod
    def phases(cls, dim: int) -> "Bounds":
        return cls.box(dim, 0.0, 2.0 * np.pi, periodic=True)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def project(self, x: np.ndarray) -> np.ndarray:
        """Wrap periodic coordinates into [lower, upper), clamp the rest."""
        x = np.array(x, dtype=float)
        wrapped = self.lower + np.mod(x - self.lower, self.width)
        wrapped = np.where(wrapped >= self.upper, self.lower, wrapped)
        clamped = np.clip(x, self.lower, self.upper)
        return np.where(self.periodic, wrapped, clamped)

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x)
        upper_ok = np.where(self.periodic, x < self.upper, x <= self.upper)
        return bool(np.all((x >= self.lower) & upper_ok))


@dataclass
class Candidate:
    position: np.ndarray
    mean_fitness: Optional[float] = None
    sample_count: int = 0

    def copy(self) -> "Candidate":
        return Candidate(self.position.copy(), self.mean_fitness, self.sample_count)


@dataclass
class DeConfig:
    population_size: int = 30
    mutation_rate: float = 0.5
    crossover_rate: float = 0.9
    maximize: bool = False
    max_iterations: int = 1000
    seed: int = 0
    workers: int = 1
    # initial population fills this central fraction of each non-periodic axis
    init_fraction: float = 1.0

    def validate(self) -> None:
        if self.population_size < 4:
            raise ConfigurationError("population_size must be >= 4 (donor needs 3 distinct others)")
        if not 0 <= self.mutation_rate <= 2:
            raise ConfigurationError("mutation_rate must lie in [0, 2]")
        if not 0 <= self.crossover_rate <= 1:
            raise ConfigurationError("crossover_rate must lie in [0, 1]")
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be >= 0")
        if not 0 < self.init_fraction <= 1:
            raise ConfigurationError("init_fraction must lie in (0, 1]")


@dataclass
class ObjectiveSpec:
    """Fitness function contract.

    ``evaluate(position, stream)`` returns one fitness sample.  Stochastic
    objectives draw all randomness from ``stream``; deterministic ones are
    called with ``stream=None``.
    """

    dimension: int
    evaluate: Callable[[np.ndarray, Optional[RngStream]], float]
    deterministic: bool = True
    name: str = "objective"


@dataclass
class OptimizeResult:
    best: Candidate
    history: np.ndarray
    n_evaluations: int
    iterations: int
    population: list[Candidate] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def better(a: float, b: float, maximize: bool) -> bool:
    """Strict improvement of ``a`` over ``b``."""
    return a > b if maximize else a < b


def evaluate_many(
    objective: ObjectiveSpec,
    positions: Sequence[np.ndarray],
    seed: int,
    paths: Sequence[tuple[Hashable, ...]],
    workers: int = 1,
) -> list[float]:
    """Evaluate positions, each with its own substream, in any thread order."""

    def one(job):
        position, path = job
        stream = None if objective.deterministic else RngStream(seed, path)
        value = float(objective.evaluate(position, stream))
        if not math.isfinite(value):
            raise EvaluationError(f"non-finite fitness {value} at path {path}")
        return value

    jobs = list(zip(positions, paths))
    if workers <= 1 or len(jobs) < 2:
        return [one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, jobs))


def de_init(config: DeConfig, bounds: Bounds, rng: RngStream, dim: Optional[int] = None) -> list[Candidate]:
    config.validate()
    if dim is not None and dim != bounds.dim:
        raise ConfigurationError(f"objective dimension {dim} != bounds dimension {bounds.dim}")
    u = rng.uniform(config.population_size * bounds.dim).reshape(config.population_size, bounds.dim)
    # u lies in (0, 1]; flip to [0, 1) so periodic upper bounds stay excluded
    positions = bounds.lower + (1.0 - u) * bounds.width
    if config.init_fraction < 1.0:
        mid = bounds.lower + bounds.width / 2
        shrunk = mid + config.init_fraction * (positions - mid)
        positions = np.where(bounds.periodic, positions, shrunk)
    return [Candidate(bounds.project(p)) for p in positions]


def crossover_donors(
    targets: np.ndarray,
    v1: np.ndarray,
    v2: np.ndarray,
    v3: np.ndarray,
    F: float,
    Cr: float,
    rng: RngStream,
    bounds: Bounds,
    active: Optional[np.ndarray] = None,
    circular_difference: bool = True,
) -> np.ndarray:
    """Row-wise DE/rand/1/bin donors.

    Element ``j`` takes ``v1 + F (v2 - v3)`` when a fresh ``r`` in (0, 1]
    satisfies ``r <= Cr``, otherwise the target's value.  When ``Cr > 0`` one
    random active index per row is forced to mutate.  Coordinates outside
    ``active`` always copy the target.
    """
    targets = np.atleast_2d(targets)
    rows, dim = targets.shape
    if active is None:
        active = np.arange(dim)
    diff = v2 - v3
    if circular_difference and bounds.periodic.any():
        w = bounds.width
        diff = np.where(bounds.periodic, (diff + w / 2) % w - w / 2, diff)
    mutant = v1 + F * diff
    r = rng.uniform(rows * dim).reshape(rows, dim)
    take = r <= Cr
    forced = active[rng.integers(active.size, rows)]
    mask = np.zeros((rows, dim), dtype=bool)
    mask[:, active] = take[:, active]
    if Cr > 0:
        mask[np.arange(rows), forced] = True
    donors = np.where(mask, mutant, targets)
    donors = bounds.project(donors)
    # frozen coordinates are copied bit-for-bit, projection must not touch them
    frozen = ~np.isin(np.arange(dim), active)
    donors[:, frozen] = targets[:, frozen]
    return donors


def de_donor(
    target: Candidate,
    others: Sequence[Candidate],
    F: float,
    Cr: float,
    rng: RngStream,
    bounds: Bounds,
) -> np.ndarray:
    if len(others) != 3:
        raise ContractViolation("donor needs exactly three other candidates")
    ids = {id(c) for c in others} | {id(target)}
    if len(ids) != 4:
        raise ContractViolation("donor candidates must be distinct from each other and the target")
    v1, v2, v3 = (np.atleast_2d(c.position) for c in others)
    return crossover_donors(target.position, v1, v2, v3, F, Cr, rng, bounds)[0]


def pick_others(population_size: int, rng: RngStream) -> np.ndarray:
    """For each index ``i`` three distinct indices, all different from ``i``."""
    keys = rng.uniform(population_size * population_size).reshape(population_size, population_size)
    np.fill_diagonal(keys, np.inf)
    return np.argsort(keys, axis=1, kind="stable")[:, :3]


def de_select(parent: Candidate, child: Candidate, maximize: bool) -> Candidate:
    if parent.sample_count < 1 or child.sample_count < 1:
        raise ContractViolation("selection needs evaluated candidates")
    return child if better(child.mean_fitness, parent.mean_fitness, maximize) else parent


def best_of(population: Sequence[Candidate], maximize: bool) -> Candidate:
    best = population[0]
    for c in population[1:]:
        if better(c.mean_fitness, best.mean_fitness, maximize):
            best = c
    return best
