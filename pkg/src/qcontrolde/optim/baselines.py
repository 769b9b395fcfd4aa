"""Baseline optimizers: global-best PSO and stochastic hill climbing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..rng import RngStream
from .core import Bounds, Candidate, ConfigurationError, ObjectiveSpec, OptimizeResult, better, evaluate_many


@dataclass
class PsoConfig:
    population_size: int = 30
    inertia: float = 0.729
    c1: float = 1.494
    c2: float = 1.494
    init_velocity: float = 0.1  # fraction of the box width
    maximize: bool = False
    max_iterations: int = 1000
    seed: int = 0
    workers: int = 1

    def validate(self):
        if self.population_size < 1:
            raise ConfigurationError("population_size must be >= 1")
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be >= 0")


@dataclass
class HillClimbConfig:
    step_sigma: float = 0.1  # fraction of the box width
    maximize: bool = False
    max_iterations: int = 1000
    seed: int = 0

    def validate(self):
        if self.step_sigma < 0:
            raise ConfigurationError("step_sigma must be >= 0")
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be >= 0")


def _one(objective, position, seed, path) -> float:
    return evaluate_many(objective, [position], seed, [path])[0]


def hill_climb_run(
    objective: ObjectiveSpec,
    config: HillClimbConfig,
    bounds: Bounds,
    max_evaluations: Optional[int] = None,
) -> OptimizeResult:
    """Single-candidate search; a Gaussian proposal replaces the incumbent iff strictly better."""
    config.validate()
    rng = RngStream(config.seed, ("algo",))
    x = bounds.project(bounds.lower + (1.0 - rng.uniform(bounds.dim)) * bounds.width)
    current = Candidate(x, _one(objective, x, config.seed, ("eval", "init", 0)), 1)
    history = [current.mean_fitness]
    n_evals = 1
    it = 0
    while it < config.max_iterations:
        if max_evaluations is not None and n_evals >= max_evaluations:
            break
        it += 1
        step = rng.gaussian(bounds.dim, 0.0, 1.0) * config.step_sigma * bounds.width
        if config.step_sigma == 0:
            history.append(current.mean_fitness)
            continue
        proposal = bounds.project(current.position + step)
        value = _one(objective, proposal, config.seed, ("eval", "step", it))
        n_evals += 1
        if better(value, current.mean_fitness, config.maximize):
            current = Candidate(proposal, value, 1)
        history.append(current.mean_fitness)
    return OptimizeResult(current.copy(), np.array(history), n_evals, it, [current])


def pso_run(
    objective: ObjectiveSpec,
    config: PsoConfig,
    bounds: Bounds,
    max_evaluations: Optional[int] = None,
) -> OptimizeResult:
    """Global-best PSO with constriction-style defaults."""
    config.validate()
    rng = RngStream(config.seed, ("algo",))
    P, D = config.population_size, bounds.dim
    x = bounds.project(bounds.lower + (1.0 - rng.uniform(P * D).reshape(P, D)) * bounds.width)
    v = (2.0 * rng.uniform(P * D).reshape(P, D) - 1.0) * config.init_velocity * bounds.width
    vmax = bounds.width

    def evaluate(positions, it):
        paths = [("eval", it, i) for i in range(len(positions))]
        return np.array(evaluate_many(objective, list(positions), config.seed, paths, config.workers))

    f = evaluate(x, 0)
    n_evals = P
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmax(f) if config.maximize else np.argmin(f))
    gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
    history = [gbest_f]
    it = 0
    while it < config.max_iterations:
        if max_evaluations is not None and n_evals + P > max_evaluations:
            break
        it += 1
        r1 = rng.uniform(P * D).reshape(P, D)
        r2 = rng.uniform(P * D).reshape(P, D)
        cognitive = pbest - x
        social = gbest - x
        # shortest signed displacement on periodic axes
        wrap = bounds.periodic
        for delta in (cognitive, social):
            delta[:, wrap] = (delta[:, wrap] + bounds.width[wrap] / 2) % bounds.width[wrap] - bounds.width[wrap] / 2
        v = config.inertia * v + config.c1 * r1 * cognitive + config.c2 * r2 * social
        v = np.clip(v, -vmax, vmax)
        x = bounds.project(x + v)
        f = evaluate(x, it)
        n_evals += P
        improved = np.array([better(a, b, config.maximize) for a, b in zip(f, pbest_f)])
        pbest[improved] = x[improved]
        pbest_f[improved] = f[improved]
        g = int(np.argmax(pbest_f) if config.maximize else np.argmin(pbest_f))
        if better(pbest_f[g], gbest_f, config.maximize):
            gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
        history.append(gbest_f)
    best = Candidate(gbest, gbest_f, 1)
    population = [Candidate(p, float(fv), 1) for p, fv in zip(pbest, pbest_f)]
    return OptimizeResult(best, np.array(history), n_evals, it, population)
