"""Subspace-selective self-adaptive differential evolution (SuSSADE)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..rng import RngStream
from .core import Bounds, ConfigurationError, DeConfig, ObjectiveSpec, OptimizeResult
from .de import IterationHook, Sampling, evolve
from .noise_resistant import NrDeConfig


@dataclass
class SussadeConfig:
    base: DeConfig = field(default_factory=DeConfig)
    F_l: float = 0.1
    F_u: float = 0.9
    kappa1: float = 0.1
    kappa2: float = 0.1
    switching_rate: float = 0.3
    subspace_size: Optional[int] = None  # None: a third of the dimension

    def validate(self, dimension: Optional[int] = None) -> None:
        self.base.validate()
        if not 0 < self.F_l < self.F_l + self.F_u:
            raise ConfigurationError("need 0 < F_l < F_l + F_u")
        for name in ("kappa1", "kappa2", "switching_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if dimension is not None:
            k = self.resolved_subspace(dimension)
            if not 1 <= k < dimension:
                raise ConfigurationError(f"subspace_size {k} must lie in [1, {dimension})")

    def resolved_subspace(self, dimension: int) -> int:
        return self.subspace_size if self.subspace_size is not None else max(1, dimension // 3)


@dataclass
class SussadeState:
    F_G: float
    Cr_G: float
    iteration: int = 0


def adapt_rates(state: SussadeState, config: SussadeConfig, rng: RngStream) -> SussadeState:
    r1, r2, r3, r4 = rng.uniform(4)
    F = config.F_l + r1 * config.F_u if r2 < config.kappa1 else state.F_G
    Cr = r3 if r4 < config.kappa2 else state.Cr_G
    return SussadeState(float(F), float(Cr), state.iteration + 1)


def select_subspace(dimension: int, config: SussadeConfig, rng: RngStream) -> np.ndarray:
    """All indices with probability ``switching_rate``, else a random subset."""
    k = config.resolved_subspace(dimension)
    if k >= dimension:
        raise ConfigurationError(f"subspace_size {k} must be below dimension {dimension}")
    r = 1.0 - rng.uniform1()  # [0, 1)
    if r < config.switching_rate:
        return np.arange(dimension)
    return rng.subset(dimension, k)


class _SussadeControl:
    def __init__(self, config: SussadeConfig):
        self.config = config
        self.state = SussadeState(config.base.mutation_rate, config.base.crossover_rate)
        self.trace: list[tuple[float, float, bool]] = []

    def rates(self, iteration, rng):
        self.state = adapt_rates(self.state, self.config, rng)
        return self.state.F_G, self.state.Cr_G

    def active(self, iteration, dim, rng):
        idx = select_subspace(dim, self.config, rng)
        self.trace.append((self.state.F_G, self.state.Cr_G, idx.size == dim))
        return idx


def sussade_run(
    objective: ObjectiveSpec,
    config: SussadeConfig,
    bounds: Bounds,
    max_evaluations: Optional[int] = None,
    hook: Optional[IterationHook] = None,
    noise: Optional[NrDeConfig] = None,
) -> OptimizeResult:
    """SuSSADE; stochastic objectives get noise-resistant sampling.

    ``noise`` overrides the sample counts used for stochastic objectives
    (its ``base`` is ignored in favour of ``config.base``).
    """
    config.validate(bounds.dim)
    if objective.deterministic:
        sampling = Sampling()
    else:
        sampling = (noise or NrDeConfig()).sampling()
    control = _SussadeControl(config)
    result = evolve(
        objective,
        bounds,
        config.base,
        sampling,
        rate_control=control,
        subspace_control=control,
        hook=hook,
        max_evaluations=max_evaluations,
    )
    result.extra["rate_trace"] = control.trace
    return result
