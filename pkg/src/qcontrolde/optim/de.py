"""Generational DE loop shared by plain, noise-resistant and subspace-adaptive DE."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from ..rng import RngStream
from .core import (
    Bounds,
    Candidate,
    DeConfig,
    ObjectiveSpec,
    OptimizeResult,
    best_of,
    crossover_donors,
    de_init,
    evaluate_many,
    pick_others,
)


@dataclass(frozen=True)
class Sampling:
    """Fitness samples drawn at each stage of an iteration."""

    init: int = 1
    donor: int = 1
    step: int = 0
    final: int = 0

    def __post_init__(self):
        if self.init < 1 or self.donor < 1 or self.step < 0 or self.final < 0:
            raise ValueError(f"invalid sampling schedule {self}")


class TerminationRule(Protocol):
    def __call__(self, iteration: int, population: Sequence[Candidate], history: Sequence[float]) -> bool: ...


@dataclass
class FixedIterations:
    iterations: int

    def __call__(self, iteration, population, history) -> bool:
        return iteration >= self.iterations


class RateControl(Protocol):
    def rates(self, iteration: int, rng: RngStream) -> tuple[float, float]: ...


class SubspaceControl(Protocol):
    def active(self, iteration: int, dim: int, rng: RngStream) -> Optional[np.ndarray]: ...


IterationHook = Callable[[int, list, list, dict], None]


def _add_samples(candidate: Candidate, samples: Sequence[float]) -> None:
    for s in samples:
        n = candidate.sample_count
        candidate.mean_fitness = s if n == 0 else (candidate.mean_fitness * n + s) / (n + 1)
        candidate.sample_count = n + 1


def _sample_all(objective, candidates, count, tag, iteration, config) -> int:
    if count == 0:
        return 0
    jobs, paths = [], []
    for i, c in enumerate(candidates):
        for s in range(count):
            jobs.append(c.position)
            paths.append(("eval", tag, iteration, i, s))
    values = evaluate_many(objective, jobs, config.seed, paths, config.workers)
    for i, c in enumerate(candidates):
        _add_samples(c, values[i * count : (i + 1) * count])
    return len(values)


def evolve(
    objective: ObjectiveSpec,
    bounds: Bounds,
    config: DeConfig,
    sampling: Sampling = Sampling(),
    terminator: Optional[TerminationRule] = None,
    rate_control: Optional[RateControl] = None,
    subspace_control: Optional[SubspaceControl] = None,
    hook: Optional[IterationHook] = None,
    max_evaluations: Optional[int] = None,
) -> OptimizeResult:
    """Run DE/rand/1/bin with running-mean selection.

    ``config.max_iterations`` is a hard cap that applies whatever the
    terminator says.  ``max_evaluations`` stops the loop before an iteration
    that would exceed the budget.
    """
    config.validate()
    maximize = config.maximize
    algo = RngStream(config.seed, ("algo",))
    population = de_init(config, bounds, algo, objective.dimension)
    n_evals = _sample_all(objective, population, sampling.init, "init", 0, config)
    history = [best_of(population, maximize).mean_fitness]
    per_iteration = config.population_size * (sampling.donor + sampling.step)

    iteration = 0
    while iteration < config.max_iterations:
        if terminator is not None and terminator(iteration, population, history):
            break
        if max_evaluations is not None and n_evals + per_iteration > max_evaluations:
            break
        iteration += 1
        if rate_control is not None:
            F, Cr = rate_control.rates(iteration, algo)
        else:
            F, Cr = config.mutation_rate, config.crossover_rate
        active = None
        if subspace_control is not None:
            active = subspace_control.active(iteration, bounds.dim, algo)

        targets = np.array([c.position for c in population])
        others = pick_others(len(population), algo)
        donors = crossover_donors(
            targets,
            targets[others[:, 0]],
            targets[others[:, 1]],
            targets[others[:, 2]],
            F,
            Cr,
            algo,
            bounds,
            active,
        )
        children = [Candidate(d) for d in donors]
        n_evals += _sample_all(objective, children, sampling.donor, "donor", iteration, config)
        accepted = []
        for i, child in enumerate(children):
            parent = population[i]
            if (child.mean_fitness > parent.mean_fitness) if maximize else (child.mean_fitness < parent.mean_fitness):
                population[i] = child
                accepted.append(i)
        n_evals += _sample_all(objective, population, sampling.step, "step", iteration, config)
        history.append(best_of(population, maximize).mean_fitness)
        if hook is not None:
            hook(iteration, population, accepted, {"F": F, "Cr": Cr, "active": active, "targets": targets})

    n_evals += _sample_all(objective, population, sampling.final, "final", iteration, config)
    best = best_of(population, maximize)
    return OptimizeResult(
        best=best.copy(),
        history=np.array(history),
        n_evaluations=n_evals,
        iterations=iteration,
        population=population,
    )


def de_run(
    objective: ObjectiveSpec,
    config: DeConfig,
    bounds: Bounds,
    max_evaluations: Optional[int] = None,
    hook: Optional[IterationHook] = None,
) -> OptimizeResult:
    """Plain DE with one sample per evaluation and strict selection."""
    return evolve(objective, bounds, config, Sampling(), hook=hook, max_evaluations=max_evaluations)
