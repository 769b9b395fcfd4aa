import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcontrolde.optim import (
    Bounds,
    Candidate,
    ConfigurationError,
    ContractViolation,
    DeConfig,
    HillClimbConfig,
    ObjectiveSpec,
    PsoConfig,
    benchmark,
    de_donor,
    de_init,
    de_run,
    de_select,
    hill_climb_run,
    pso_run,
)
from qcontrolde.rng import seeded_stream

TWO_PI = 2 * np.pi


def test_de_init_range_and_counts():
    pop = de_init(DeConfig(population_size=20), Bounds.phases(10), seeded_stream(1))
    assert len(pop) == 20
    for c in pop:
        assert c.position.shape == (10,)
        assert np.all((c.position >= 0) & (c.position < TWO_PI))
        assert c.sample_count == 0 and c.mean_fitness is None


def test_de_init_deterministic():
    a = de_init(DeConfig(population_size=20), Bounds.phases(10), seeded_stream(1, ("x",)))
    b = de_init(DeConfig(population_size=20), Bounds.phases(10), seeded_stream(1, ("x",)))
    assert all(np.array_equal(p.position, q.position) for p, q in zip(a, b))


def test_de_init_rejects_small_population():
    with pytest.raises(ConfigurationError):
        de_init(DeConfig(population_size=3), Bounds.phases(2), seeded_stream(1))


def test_de_init_rejects_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        de_init(DeConfig(), Bounds.phases(2), seeded_stream(1), dim=3)


def _c(*xs):
    return Candidate(np.array(xs, dtype=float))


WIDE = Bounds.box(2, -100, 100)


def test_donor_formula():
    donor = de_donor(_c(0, 0), [_c(1, 2), _c(3, 4), _c(1, 1)], 0.5, 1.0, seeded_stream(1), WIDE)
    assert np.allclose(donor, [2.0, 3.5])


def test_donor_cr_zero_copies_target():
    target = _c(9, -9)
    donor = de_donor(target, [_c(1, 2), _c(3, 4), _c(1, 1)], 0.5, 0.0, seeded_stream(1), WIDE)
    assert np.array_equal(donor, target.position)


def test_donor_f_zero_returns_v1():
    donor = de_donor(_c(0, 0), [_c(1, 2), _c(3, 4), _c(1, 1)], 0.0, 1.0, seeded_stream(1), WIDE)
    assert np.array_equal(donor, [1.0, 2.0])


def test_donor_periodic_wrap():
    b = Bounds.phases(1)
    donor = de_donor(_c(0.0), [_c(6.0), _c(3.0), _c(1.0)], 0.5, 1.0, seeded_stream(1), b)
    assert donor[0] == pytest.approx(7.0 - TWO_PI)
    assert donor[0] == pytest.approx(0.7168, abs=1e-4)


def test_donor_clamps_nonperiodic():
    b = Bounds.box(1, 0.0, 1.0)
    donor = de_donor(_c(0.5), [_c(0.9), _c(1.0), _c(0.0)], 1.0, 1.0, seeded_stream(1), b)
    assert donor[0] == 1.0


def test_donor_requires_distinct_candidates():
    a = _c(1, 1)
    with pytest.raises(ContractViolation):
        de_donor(_c(0, 0), [a, a, _c(2, 2)], 0.5, 1.0, seeded_stream(1), WIDE)


def test_donor_at_least_one_mutation_when_cr_positive():
    stream = seeded_stream(3)
    for _ in range(200):
        donor = de_donor(_c(0, 0, 0, 0), [_c(1, 1, 1, 1), _c(2, 2, 2, 2), _c(1, 1, 1, 1)], 0.5, 1e-9, stream, Bounds.box(4, -10, 10))
        assert np.sum(donor != 0) >= 1


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=12, max_size=12),
    st.floats(0, 2),
    st.floats(0, 1),
    st.booleans(),
)
def test_donor_stays_in_bounds(values, F, Cr, periodic):
    b = Bounds.box(3, -1.0, 2.0, periodic=periodic)
    v = np.array(values).reshape(4, 3)
    cands = [Candidate(b.project(row)) for row in v]
    donor = de_donor(cands[0], cands[1:], F, Cr, seeded_stream(0), b)
    assert b.contains(donor)


def _evaluated(value):
    return Candidate(np.zeros(1), value, 1)


def test_select_maximize_prefers_better_child():
    child = _evaluated(0.6)
    assert de_select(_evaluated(0.5), child, maximize=True) is child


def test_select_tie_keeps_parent():
    parent = _evaluated(0.5)
    assert de_select(parent, _evaluated(0.5), maximize=True) is parent


def test_select_minimize_orientation():
    parent = _evaluated(0.5)
    assert de_select(parent, _evaluated(0.6), maximize=False) is parent


def test_select_requires_evaluation():
    with pytest.raises(ContractViolation):
        de_select(Candidate(np.zeros(1)), _evaluated(1.0), maximize=True)


def test_de_run_sphere():
    objective, bounds = benchmark("sphere", 10)
    result = de_run(objective, DeConfig(population_size=30, max_iterations=2000, seed=1), bounds)
    assert result.best.mean_fitness < 1e-8
    assert np.all(np.diff(result.history) <= 0)


def test_de_run_zero_iterations_returns_best_initial():
    objective, bounds = benchmark("sphere", 4)
    result = de_run(objective, DeConfig(population_size=10, max_iterations=0, seed=2), bounds)
    assert result.iterations == 0
    assert result.best.mean_fitness == min(c.mean_fitness for c in result.population)
    assert result.history.size == 1


def test_de_run_rastrigin_2d():
    objective, bounds = benchmark("rastrigin", 2)
    result = de_run(objective, DeConfig(population_size=30, max_iterations=600, seed=3), bounds)
    assert result.best.mean_fitness < 1e-6


def test_de_run_positions_stay_in_bounds_and_history_monotone():
    objective, bounds = benchmark("rosenbrock", 5)

    def hook(iteration, population, accepted, info):
        for c in population:
            assert bounds.contains(c.position)

    result = de_run(objective, DeConfig(population_size=12, max_iterations=100, seed=4), bounds, hook=hook)
    assert np.all(np.diff(result.history) <= 0)


def test_de_run_reproducible():
    objective, bounds = benchmark("rastrigin", 5)
    cfg = DeConfig(population_size=12, max_iterations=50, seed=99)
    a, b = de_run(objective, cfg, bounds), de_run(objective, cfg, bounds)
    assert np.array_equal(a.history, b.history)
    assert np.array_equal(a.best.position, b.best.position)


def test_de_run_respects_evaluation_budget():
    objective, bounds = benchmark("sphere", 3)
    result = de_run(objective, DeConfig(population_size=10, max_iterations=10_000, seed=1), bounds, max_evaluations=1000)
    assert result.n_evaluations <= 1000
    assert result.n_evaluations == 10 + 10 * result.iterations


def quadratic_1d():
    return ObjectiveSpec(1, lambda x, s: float((x[0] - 1.25) ** 2)), Bounds.box(1, -5, 5)


def test_hill_climb_converges_on_quadratic():
    objective, bounds = quadratic_1d()
    result = hill_climb_run(objective, HillClimbConfig(step_sigma=0.01, max_iterations=5000, seed=1), bounds)
    # analytic minimum: 0 at x = 1.25
    assert result.best.mean_fitness < 1e-6
    assert abs(result.best.position[0] - 1.25) < 1e-3


def test_hill_climb_zero_step_is_static():
    objective, bounds = quadratic_1d()
    result = hill_climb_run(objective, HillClimbConfig(step_sigma=0.0, max_iterations=50, seed=1), bounds)
    first = hill_climb_run(objective, HillClimbConfig(step_sigma=0.0, max_iterations=0, seed=1), bounds)
    assert np.array_equal(result.best.position, first.best.position)
    assert np.all(result.history == result.history[0])


def test_hill_climb_deterministic():
    objective, bounds = benchmark("rastrigin", 3)
    cfg = HillClimbConfig(max_iterations=300, seed=5)
    a, b = hill_climb_run(objective, cfg, bounds), hill_climb_run(objective, cfg, bounds)
    assert np.array_equal(a.history, b.history)


def test_pso_sphere():
    objective, bounds = benchmark("sphere", 10)
    result = pso_run(objective, PsoConfig(population_size=30, max_iterations=1500, seed=1), bounds)
    assert result.best.mean_fitness < 1e-6
    assert np.all(np.diff(result.history) <= 0)


def test_pso_single_static_particle():
    objective, bounds = benchmark("sphere", 3)
    cfg = PsoConfig(population_size=1, c1=0.0, c2=0.0, init_velocity=0.0, max_iterations=20, seed=1)
    start = pso_run(objective, PsoConfig(population_size=1, init_velocity=0.0, max_iterations=0, seed=1), bounds)
    result = pso_run(objective, cfg, bounds)
    assert np.array_equal(result.population[0].position, start.population[0].position)


def test_pso_deterministic():
    objective, bounds = benchmark("rastrigin", 4)
    cfg = PsoConfig(population_size=10, max_iterations=100, seed=8)
    a, b = pso_run(objective, cfg, bounds), pso_run(objective, cfg, bounds)
    assert np.array_equal(a.history, b.history)
    assert np.array_equal(a.best.position, b.best.position)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), st.booleans())
def test_project_lands_in_bounds(values, periodic):
    b = Bounds.box(3, -2.0, 3.0, periodic=periodic)
    assert b.contains(b.project(np.array(values)))


def test_bounds_validation():
    with pytest.raises(ConfigurationError):
        Bounds(np.array([0.0, 1.0]), np.array([1.0, 1.0]), False)
    with pytest.raises(ConfigurationError):
        Bounds(np.array([0.0]), np.array([1.0, 2.0]), False)
