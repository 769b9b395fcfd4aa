"""Noise-resistant DE: selection on running-mean fitness.

Each candidate is sampled twice at creation, once more every iteration it
survives, and the whole population ten more times before the answer is
picked.  Long-lived candidates therefore accumulate samples, so the
sample size grows where selection pressure is highest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .core import Bounds, Candidate, DeConfig, EvaluationError, ObjectiveSpec, OptimizeResult
from .de import FixedIterations, IterationHook, Sampling, TerminationRule, evolve


@dataclass
class NrDeConfig:
    base: DeConfig = field(default_factory=lambda: DeConfig(maximize=True))
    init_samples: int = 2
    per_iteration_samples: int = 1
    final_samples: int = 10

    def sampling(self) -> Sampling:
        if min(self.init_samples, self.per_iteration_samples, self.final_samples) < 1:
            raise ValueError("all sample counts must be >= 1")
        return Sampling(
            init=self.init_samples,
            donor=self.init_samples,
            step=self.per_iteration_samples,
            final=self.final_samples,
        )


def nr_update_mean(candidate: Candidate, new_sample: float) -> Candidate:
    if not math.isfinite(new_sample):
        raise EvaluationError(f"non-finite fitness sample {new_sample}")
    n = candidate.sample_count
    mean = new_sample if n == 0 else (candidate.mean_fitness * n + new_sample) / (n + 1)
    return Candidate(candidate.position, mean, n + 1)


def nr_de_run(
    objective: ObjectiveSpec,
    config: NrDeConfig,
    bounds: Bounds,
    terminator: Optional[TerminationRule] = None,
    hook: Optional[IterationHook] = None,
    max_evaluations: Optional[int] = None,
) -> OptimizeResult:
    """Noise-resistant DE with running-mean selection.

    ``terminator`` defaults to running ``config.base.max_iterations``
    iterations, which also caps any other rule.
    """
    if terminator is None:
        terminator = FixedIterations(config.base.max_iterations)
    return evolve(
        objective,
        bounds,
        config.base,
        config.sampling(),
        terminator=terminator,
        hook=hook,
        max_evaluations=max_evaluations,
    )
