"""Piecewise-constant pulse synthesis of multi-qubit gates.

The control problem uses a qubit-chain surrogate Hamiltonian

    H(eps) = sum_i eps_i X_i + sum_i detuning_i Z_i + J sum_i Z_i Z_{i+1}

in units where the step length ``dt`` is 1.  A pulse sequence is a
``(n_lines, T)`` array; the synthesized unitary is the time-ordered
product of the per-step propagators, latest step on the left.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .optim.core import Bounds, ConfigurationError, ContractViolation, ObjectiveSpec
from .rng import RngStream

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _site(op: np.ndarray, site: int, n: int) -> np.ndarray:
    return reduce(np.kron, [op if q == site else I2 for q in range(n)])


def toffoli() -> np.ndarray:
    """CCNOT with qubit 0 as the most significant bit; targets qubit 2."""
    U = np.eye(8, dtype=complex)
    U[[6, 7]] = U[[7, 6]]
    return U


@dataclass
class HamiltonianSpec:
    n_qubits: int = 3
    coupling: float = 2 * np.pi * 0.05
    detunings: Sequence[float] = (2 * np.pi * 0.1, 2 * np.pi * 0.13, 2 * np.pi * 0.07)

    def __post_init__(self):
        self.detunings = tuple(float(d) for d in self.detunings)
        if len(self.detunings) != self.n_qubits:
            raise ConfigurationError("one detuning per qubit required")
        n = self.n_qubits
        drift = sum(self.detunings[i] * _site(Z, i, n) for i in range(n))
        for i in range(n - 1):
            drift = drift + self.coupling * _site(Z, i, n) @ _site(Z, i + 1, n)
        self.drift = np.asarray(drift, dtype=complex)
        self.controls = np.array([_site(X, i, n) for i in range(n)])

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def n_controls(self) -> int:
        return self.n_qubits

    def __call__(self, column: np.ndarray) -> np.ndarray:
        """Hamiltonian for one control column ``eps(t)``."""
        return self.drift + np.tensordot(np.asarray(column, dtype=float), self.controls, axes=1)

    def stack(self, amplitudes: np.ndarray) -> np.ndarray:
        """Hamiltonians for every step, shape ``(T, d, d)``."""
        return self.drift[None] + np.einsum("it,ijk->tjk", amplitudes, self.controls)


@dataclass
class GateProblem:
    target: np.ndarray = field(default_factory=toffoli)
    hamiltonian: HamiltonianSpec = field(default_factory=HamiltonianSpec)
    dt: float = 1.0
    T: int = 27
    amplitude_bound: float = 2 * np.pi * 0.5

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=complex)
        d = self.hamiltonian.dim
        if self.target.shape != (d, d):
            raise ConfigurationError(f"target must be {d}x{d}")
        if not np.allclose(self.target.conj().T @ self.target, np.eye(d), atol=1e-10):
            raise ConfigurationError("target is not unitary")

    @property
    def n_lines(self) -> int:
        return self.hamiltonian.n_controls

    @property
    def tau(self) -> float:
        return self.T * self.dt

    @property
    def dimension(self) -> int:
        return self.n_lines * self.T

    def bounds(self) -> Bounds:
        return Bounds.box(self.dimension, -self.amplitude_bound, self.amplitude_bound)


@dataclass
class PulseSequence:
    amplitudes: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        self.amplitudes = np.atleast_2d(np.asarray(self.amplitudes, dtype=float))

    @property
    def T(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def n_lines(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def tau(self) -> float:
        return self.T * self.dt

    @classmethod
    def from_vector(cls, vector: np.ndarray, n_lines: int, dt: float = 1.0) -> "PulseSequence":
        return cls(np.asarray(vector, dtype=float).reshape(n_lines, -1), dt)

    def to_vector(self) -> np.ndarray:
        return self.amplitudes.ravel().copy()


def _check_hermitian(H: np.ndarray) -> None:
    if not np.allclose(H, np.conj(np.swapaxes(H, -1, -2)), atol=1e-10):
        raise ContractViolation("Hamiltonian is not Hermitian")


def _expm_hermitian(H: np.ndarray, dt: float) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    phases = np.exp(-1j * w * dt)
    return (V * phases[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def propagate_step(H: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i H dt)`` for Hermitian ``H`` (or a stack of them)."""
    H = np.asarray(H, dtype=complex)
    _check_hermitian(H)
    return _expm_hermitian(H, dt)


def compose_steps(steps: np.ndarray) -> np.ndarray:
    """Product ``steps[-1] @ ... @ steps[0]``."""
    U = steps[0]
    for S in steps[1:]:
        U = S @ U
    return U


def compose_unitary(pulses: PulseSequence, problem: GateProblem) -> np.ndarray:
    if pulses.n_lines != problem.n_lines:
        raise ConfigurationError(f"pulses have {pulses.n_lines} lines, problem has {problem.n_lines}")
    H = problem.hamiltonian.stack(pulses.amplitudes)
    return compose_steps(_expm_hermitian(H, pulses.dt))


def intrinsic_fidelity(U_T: np.ndarray, U: np.ndarray) -> float:
    if U_T.shape != U.shape:
        raise ConfigurationError(f"dimension mismatch {U_T.shape} vs {U.shape}")
    return float(abs(np.trace(U_T.conj().T @ U)) / U_T.shape[0])


def gaussian_filter(pulses: PulseSequence, kernel_sigma: float) -> PulseSequence:
    """Smooth each control line with a normalized Gaussian truncated at 4 sigma.

    ``kernel_sigma`` is in time units; edges are extended by replication.
    """
    if kernel_sigma < 0:
        raise ValueError("kernel_sigma must be >= 0")
    if kernel_sigma == 0:
        return PulseSequence(pulses.amplitudes.copy(), pulses.dt)
    smoothed = gaussian_filter1d(
        pulses.amplitudes, kernel_sigma / pulses.dt, axis=1, mode="nearest", truncate=4.0
    )
    return PulseSequence(smoothed, pulses.dt)


def gate_fidelity(pulses: PulseSequence, problem: GateProblem, filter_sigma: float = 0.0) -> float:
    shaped = gaussian_filter(pulses, filter_sigma)
    return intrinsic_fidelity(problem.target, compose_unitary(shaped, problem))


def gate_objective(problem: GateProblem, filter_sigma: float = 1.0) -> ObjectiveSpec:
    """Deterministic, maximized fidelity of a flattened ``(n_lines, T)`` pulse vector."""

    def evaluate(position, stream=None):
        pulses = PulseSequence.from_vector(position, problem.n_lines, problem.dt)
        return gate_fidelity(pulses, problem, filter_sigma)

    return ObjectiveSpec(problem.dimension, evaluate, deterministic=True, name="gate")


@dataclass
class RobustnessCurve:
    delta_eps: np.ndarray
    mean_fidelity: np.ndarray
    std_error: np.ndarray


def robustness_scan(
    pulses: PulseSequence,
    problem: GateProblem,
    delta_eps_grid: Sequence[float],
    trials: int,
    rng: RngStream,
    filter_sigma: float = 0.0,
) -> RobustnessCurve:
    """Mean fidelity under ``eps + delta_eps * rand(-1, 1)`` noise on every bin.

    Noise is added to the raw pulses, which then pass through the same
    filter used during optimization.
    """
    grid = np.asarray(delta_eps_grid, dtype=float)
    means, errors = [], []
    for g, de in enumerate(grid):
        if de == 0:
            F0 = gate_fidelity(pulses, problem, filter_sigma)
            means.append(F0)
            errors.append(0.0)
            continue
        stream = rng.child("robustness", g)
        values = np.empty(trials)
        for k in range(trials):
            u = stream.uniform(pulses.amplitudes.size).reshape(pulses.amplitudes.shape)
            noisy = PulseSequence(pulses.amplitudes + de * (2.0 * u - 1.0), pulses.dt)
            values[k] = gate_fidelity(noisy, problem, filter_sigma)
        means.append(float(values.mean()))
        errors.append(float(values.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0)
    return RobustnessCurve(grid, np.array(means), np.array(errors))


def write_pulses(path: str | Path, pulses: PulseSequence) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_lines={pulses.n_lines},T={pulses.T},dt={pulses.dt!r}\n")
        writer = csv.writer(fh)
        writer.writerow([f"eps_{i + 1}" for i in range(pulses.n_lines)])
        for column in pulses.amplitudes.T:
            writer.writerow([repr(float(v)) for v in column])


def read_pulses(path: str | Path) -> PulseSequence:
    with open(path, newline="") as fh:
        header = fh.readline().lstrip("#").strip()
        meta = dict(item.split("=") for item in header.split(","))
        rows = list(csv.reader(fh))[1:]
    amplitudes = np.array([[float(v) for v in row] for row in rows]).T
    pulses = PulseSequence(amplitudes, float(meta["dt"]))
    if pulses.n_lines != int(meta["n_lines"]) or pulses.T != int(meta["T"]):
        raise ValueError(f"{path}: header does not match data shape {amplitudes.shape}")
    return pulses


def random_pulses(problem: GateProblem, rng: RngStream, scale: Optional[float] = None) -> PulseSequence:
    scale = problem.amplitude_bound if scale is None else scale
    u = rng.uniform(problem.dimension).reshape(problem.n_lines, problem.T)
    return PulseSequence(scale * (2.0 * u - 1.0), problem.dt)
