from .baselines import HillClimbConfig, PsoConfig, hill_climb_run, pso_run
from .benchmarks import benchmark, rastrigin, rosenbrock, sphere
from .core import (
    Bounds,
    Candidate,
    ConfigurationError,
    ContractViolation,
    DeConfig,
    EvaluationError,
    ObjectiveSpec,
    OptimizeResult,
    de_donor,
    de_init,
    de_select,
)
from .de import FixedIterations, Sampling, de_run, evolve
from .noise_resistant import NrDeConfig, nr_de_run, nr_update_mean
from .sussade import SussadeConfig, SussadeState, adapt_rates, select_subspace, sussade_run
