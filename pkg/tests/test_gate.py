import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import filter_rows, pauli_site, toffoli_by_table, truncated_gaussian_kernel
from qcontrolde.gate import (
    GateProblem,
    HamiltonianSpec,
    PulseSequence,
    compose_steps,
    compose_unitary,
    gate_fidelity,
    gate_objective,
    gaussian_filter,
    intrinsic_fidelity,
    propagate_step,
    random_pulses,
    read_pulses,
    robustness_scan,
    toffoli,
    write_pulses,
)
from qcontrolde.optim import ConfigurationError, ContractViolation
from qcontrolde.rng import seeded_stream

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def _random_hermitian(d, rng):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (A + A.conj().T) / 2


def test_toffoli_matches_truth_table():
    assert np.array_equal(toffoli(), toffoli_by_table())


def test_zero_hamiltonian_gives_identity():
    assert np.allclose(propagate_step(np.zeros((4, 4)), 1.0), np.eye(4), atol=1e-15)


def test_half_pi_x_rotation():
    U = propagate_step(np.pi / 2 * X, 1.0)
    assert np.allclose(U, -1j * X, atol=1e-12)
    assert abs(abs(U[0, 1]) - 1) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4, 8]), st.floats(0.01, 5))
def test_step_is_unitary_and_matches_expm(seed, d, dt):
    H = _random_hermitian(d, np.random.default_rng(seed))
    U = propagate_step(H, dt)
    assert np.max(np.abs(U @ U.conj().T - np.eye(d))) < 1e-12
    assert np.max(np.abs(U - scipy.linalg.expm(-1j * H * dt))) < 1e-10


def test_non_hermitian_rejected():
    with pytest.raises(ContractViolation):
        propagate_step(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


def test_inverse_sequence_gives_identity():
    rng = np.random.default_rng(3)
    Hs = [_random_hermitian(8, rng) for _ in range(10)]
    forward = compose_steps(np.array([propagate_step(H, 0.7) for H in Hs]))
    backward = compose_steps(np.array([propagate_step(-H, 0.7) for H in reversed(Hs)]))
    assert np.max(np.abs(backward @ forward - np.eye(8))) < 1e-10


def test_two_equal_steps_equal_one_long_step():
    H = _random_hermitian(8, np.random.default_rng(4))
    two = compose_steps(np.array([propagate_step(H, 1.0)] * 2))
    assert np.max(np.abs(two - scipy.linalg.expm(-2j * H))) < 1e-10


def test_time_ordering_latest_step_left():
    A, B = np.pi / 4 * X, np.pi / 4 * Z
    UA, UB = propagate_step(A, 1.0), propagate_step(B, 1.0)
    composed = compose_steps(np.array([UA, UB]))
    assert np.allclose(composed, UB @ UA, atol=1e-14)
    assert not np.allclose(composed, UA @ UB, atol=1e-3)


def test_compose_unitary_uses_stepwise_hamiltonians():
    problem = GateProblem(T=4)
    pulses = random_pulses(problem, seeded_stream(1))
    expected = np.eye(8)
    for t in range(4):
        expected = scipy.linalg.expm(-1j * problem.hamiltonian(pulses.amplitudes[:, t])) @ expected
    assert np.max(np.abs(compose_unitary(pulses, problem) - expected)) < 1e-10


def test_unitarity_through_long_composition():
    problem = GateProblem(T=200)
    U = compose_unitary(random_pulses(problem, seeded_stream(2)), problem)
    assert np.max(np.abs(U.conj().T @ U - np.eye(8))) < 1e-9


def test_shape_mismatch_rejected():
    with pytest.raises(ConfigurationError):
        compose_unitary(PulseSequence(np.zeros((2, 5))), GateProblem(T=5))


def test_hamiltonian_terms():
    spec = HamiltonianSpec(coupling=0.3, detunings=(0.1, 0.2, 0.4))
    eps = np.array([0.5, -0.25, 1.0])
    expected = sum(eps[i] * pauli_site(X, i, 3) for i in range(3))
    expected = expected + sum(d * pauli_site(Z, i, 3) for i, d in enumerate((0.1, 0.2, 0.4)))
    expected = expected + 0.3 * (pauli_site(Z, 0, 3) @ pauli_site(Z, 1, 3) + pauli_site(Z, 1, 3) @ pauli_site(Z, 2, 3))
    assert np.allclose(spec(eps), expected, atol=1e-14)


def test_fidelity_examples():
    U = toffoli()
    assert intrinsic_fidelity(U, U) == pytest.approx(1.0, abs=1e-15)
    assert intrinsic_fidelity(U, np.eye(8)) == 0.75
    assert intrinsic_fidelity(U, np.exp(1.234j) * U) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ConfigurationError):
        intrinsic_fidelity(U, np.eye(4))


def test_zero_pulses_without_drift_give_three_quarters():
    problem = GateProblem(hamiltonian=HamiltonianSpec(coupling=0.0, detunings=(0.0, 0.0, 0.0)))
    pulses = PulseSequence(np.zeros((3, problem.T)))
    assert gate_fidelity(pulses, problem) == pytest.approx(0.75, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fidelity_bounded(seed):
    problem = GateProblem(T=10)
    F = gate_fidelity(random_pulses(problem, seeded_stream(seed)), problem, 1.0)
    assert 0 <= F <= 1


def test_objective_dimension_and_determinism():
    problem = GateProblem()
    obj = gate_objective(problem, 1.0)
    assert obj.dimension == 3 * problem.T == 81 and obj.deterministic
    x = random_pulses(problem, seeded_stream(5)).to_vector()
    assert obj.evaluate(x) == obj.evaluate(x)


def test_basis_sufficiency():
    """F close to 1 forces every Table-1 basis input onto its Toffoli output."""
    rng = np.random.default_rng(7)
    target = toffoli()
    small = _random_hermitian(8, rng)
    small *= 1e-4 / np.linalg.norm(small, 2)
    U = np.exp(0.3j) * target @ scipy.linalg.expm(-1j * small)
    F = intrinsic_fidelity(target, U)
    assert F > 1 - 1e-6
    for k in range(8):
        out = U[:, k]
        expected = target[:, k]
        assert abs(np.vdot(expected, out)) ** 2 > 1 - 1e-5


def test_filter_constant_pulse_unchanged():
    pulses = PulseSequence(np.full((3, 20), 0.37))
    assert np.max(np.abs(gaussian_filter(pulses, 1.5).amplitudes - 0.37)) < 1e-12


def test_filter_sigma_zero_identity():
    pulses = random_pulses(GateProblem(), seeded_stream(3))
    assert np.array_equal(gaussian_filter(pulses, 0.0).amplitudes, pulses.amplitudes)


def test_filter_impulse_central_weight():
    impulse = np.zeros((1, 21))
    impulse[0, 10] = 1.0
    out = gaussian_filter(PulseSequence(impulse), 1.0).amplitudes[0]
    w = np.exp(-0.5 * np.arange(-4, 5) ** 2)
    assert out[10] == pytest.approx(1 / w.sum(), abs=1e-12)
    assert out[10] == pytest.approx(0.3989 / (w / np.sqrt(2 * np.pi)).sum(), abs=1e-4)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0, 3.3])
def test_filter_matches_hand_convolution(sigma):
    pulses = random_pulses(GateProblem(), seeded_stream(4))
    ours = gaussian_filter(pulses, sigma).amplitudes
    assert np.max(np.abs(ours - filter_rows(pulses.amplitudes, sigma))) < 1e-12
    assert truncated_gaussian_kernel(sigma).sum() == pytest.approx(1.0)


def test_filter_rejects_negative_sigma():
    with pytest.raises(ValueError):
        gaussian_filter(PulseSequence(np.zeros((1, 3))), -1.0)


def test_robustness_scan_shape():
    problem = GateProblem(T=8)
    pulses = random_pulses(problem, seeded_stream(6), scale=0.3)
    grid = [0.0, 0.05, 0.2, 0.8]
    curve = robustness_scan(pulses, problem, grid, 40, seeded_stream(7), filter_sigma=1.0)
    assert len(curve.delta_eps) == len(curve.mean_fidelity) == len(curve.std_error) == 4
    assert curve.mean_fidelity[0] == gate_fidelity(pulses, problem, 1.0)
    assert curve.std_error[0] == 0.0


def test_robustness_scan_deterministic():
    problem = GateProblem(T=8)
    pulses = random_pulses(problem, seeded_stream(6))
    a = robustness_scan(pulses, problem, [0.0, 0.1], 10, seeded_stream(8))
    b = robustness_scan(pulses, problem, [0.0, 0.1], 10, seeded_stream(8))
    assert np.array_equal(a.mean_fidelity, b.mean_fidelity)


def test_pulse_file_round_trip(tmp_path):
    pulses = random_pulses(GateProblem(), seeded_stream(9))
    path = tmp_path / "pulses.csv"
    write_pulses(path, pulses)
    lines = path.read_text().splitlines()
    assert lines[0] == "# n_lines=3,T=27,dt=1.0"
    assert lines[1] == "eps_1,eps_2,eps_3"
    assert len(lines) == 2 + 27
    back = read_pulses(path)
    assert np.array_equal(back.amplitudes, pulses.amplitudes) and back.dt == pulses.dt


def test_vector_round_trip():
    pulses = random_pulses(GateProblem(), seeded_stream(10))
    again = PulseSequence.from_vector(pulses.to_vector(), 3)
    assert np.array_equal(again.amplitudes, pulses.amplitudes)
    assert again.amplitudes[1, 0] == pulses.to_vector()[27]
