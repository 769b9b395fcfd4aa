"""Adaptive Mach-Zehnder phase estimation with Markov feedback.

The N-photon input lives in the symmetric two-mode basis ``|k, n-k>``
(k photons in arm a).  Each photon is either lost (with probability
``eta``) or detected in output port 0 or 1 with Kraus operators
``(exp(i theta) a +- b) / sqrt(2 n)``, where ``theta = phi - Phi + noise``.
After every detection the controlled phase moves by ``(-1)**x * Delta_m``.

Two execution paths exist: a readable per-photon path
(:func:`measure_photon`, :func:`lose_photon`, :func:`simulate_trajectory`)
and a compiled batch kernel used by :func:`sharpness`, which runs ``K``
trajectories from pre-drawn random blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .optim.core import ObjectiveSpec
from .rng import RngStream

TWO_PI = 2.0 * np.pi
LOST = -1
POLICY_CONVENTION = "markov-delta/sine-state/kraus-ea+-b/v1"


class InvalidMetricError(ValueError):
    pass


class NoPhotonError(ValueError):
    pass


@dataclass
class PhaseSimConfig:
    N: int
    sigma: float = 0.0
    eta: float = 0.0
    K: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0 <= self.eta < 1:
            raise ValueError("eta must be in [0, 1)")
        if self.K is None:
            self.K = 10 * self.N**2
        if self.K < 1:
            raise ValueError("K must be >= 1")


@dataclass
class Policy:
    deltas: np.ndarray

    def __post_init__(self):
        self.deltas = np.mod(np.asarray(self.deltas, dtype=float), TWO_PI)
        if self.deltas.ndim != 1:
            raise ValueError("deltas must be a vector")

    @property
    def N(self) -> int:
        return self.deltas.size


@dataclass
class SymmetricState:
    amplitudes: np.ndarray

    @property
    def n(self) -> int:
        return self.amplitudes.size - 1

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass
class TrajectoryOutcome:
    outcomes: list[int] = field(default_factory=list)
    M: int = 0
    Phi_M: float = 0.0
    estimate: float = 0.0

    @property
    def all_lost(self) -> bool:
        return self.M == 0


def make_sine_state(N: int) -> SymmetricState:
    if N < 1:
        raise ValueError("sine state needs N >= 1")
    k = np.arange(N + 1)
    amps = np.sqrt(2.0 / (N + 2)) * np.sin((k + 1) * np.pi / (N + 2))
    amps = amps / np.linalg.norm(amps)
    return SymmetricState(amps.astype(complex))


def kraus_branches(state: SymmetricState, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized post-measurement vectors for outcomes 0 and 1."""
    v = state.amplitudes
    n = state.n
    if n < 1:
        raise NoPhotonError("no photons left to measure")
    k = np.arange(n)
    up = np.exp(1j * theta) * np.sqrt(k + 1) * v[1:]
    down = np.sqrt(n - k) * v[:-1]
    scale = 1.0 / math.sqrt(2 * n)
    return (up + down) * scale, (up - down) * scale


def measure_photon(
    state: SymmetricState, theta: float, rng: RngStream
) -> tuple[int, SymmetricState, float]:
    """Detect one photon; returns ``(x, post-measurement state, p(x))``."""
    b0, b1 = kraus_branches(state, theta)
    p0 = float(np.vdot(b0, b0).real)
    if rng.uniform1() <= p0:
        x, branch, p = 0, b0, p0
    else:
        x, branch, p = 1, b1, float(np.vdot(b1, b1).real)
    return x, SymmetricState(branch / math.sqrt(p)), p


def loss_branches(state: SymmetricState) -> tuple[float, np.ndarray, np.ndarray]:
    """Probability of removing the photon from arm a, and the two unnormalized results."""
    v = state.amplitudes
    n = state.n
    if n < 1:
        raise NoPhotonError("no photons left to lose")
    k = np.arange(n + 1)
    weights = np.abs(v) ** 2
    p_a = float(np.sum(k * weights)) / (n * float(np.sum(weights)))
    from_a = np.sqrt(k[1:]) * v[1:]
    from_b = np.sqrt(n - k[:-1]) * v[:-1]
    return p_a, from_a, from_b


def lose_photon(state: SymmetricState, rng: RngStream) -> SymmetricState:
    p_a, from_a, from_b = loss_branches(state)
    out = from_a if rng.uniform1() <= p_a else from_b
    return SymmetricState(out / np.linalg.norm(out))


def update_phase(Phi: float, x: int, delta: float) -> float:
    return float(np.mod(Phi + (delta if x == 0 else -delta), TWO_PI))


def simulate_trajectory(
    policy: Policy, phi: float, config: PhaseSimConfig, rng: RngStream
) -> TrajectoryOutcome:
    if policy.N != config.N:
        raise ValueError(f"policy has length {policy.N}, config expects N={config.N}")
    state = make_sine_state(config.N)
    Phi = 0.0
    out = TrajectoryOutcome()
    for delta in policy.deltas:
        if config.eta > 0 and rng.uniform1() < config.eta:
            state = lose_photon(state, rng)
            out.outcomes.append(LOST)
            continue
        noise = rng.gaussian(1, 0.0, config.sigma)[0] if config.sigma > 0 else 0.0
        x, state, _ = measure_photon(state, phi - Phi + noise, rng)
        Phi = update_phase(Phi, x, delta)
        out.outcomes.append(x)
        out.M += 1
    out.Phi_M = Phi
    out.estimate = float(np.mod(Phi, TWO_PI))
    return out


@numba.njit(cache=True, nogil=True, fastmath=True)
def _batch_estimates(amps0, deltas, phis, noise, u_loss, u_arm, u_out, eta):
    K, N = u_out.shape
    est = np.empty(K)
    detected = np.empty(K, dtype=np.int64)
    re = np.empty(N + 1)
    im = np.empty(N + 1)
    # arm-a (up) and arm-b (down) contributions of one Kraus application
    ure = np.empty(N + 1)
    uim = np.empty(N + 1)
    dre = np.empty(N + 1)
    dim = np.empty(N + 1)
    sq = np.sqrt(np.arange(N + 2).astype(np.float64))
    use_noise = noise.shape[0] > 0
    use_loss = eta > 0.0
    two_pi = 2.0 * np.pi
    for t in range(K):
        for k in range(N + 1):
            re[k] = amps0[k].real
            im[k] = amps0[k].imag
        n = N
        Phi = 0.0
        M = 0
        for m in range(N):
            if use_loss and u_loss[t, m] < eta:
                na = 0.0
                for k in range(1, n + 1):
                    na += k * (re[k] * re[k] + im[k] * im[k])
                norm = 0.0
                if u_arm[t, m] <= na / n:
                    for k in range(n):
                        ure[k] = sq[k + 1] * re[k + 1]
                        uim[k] = sq[k + 1] * im[k + 1]
                        norm += ure[k] * ure[k] + uim[k] * uim[k]
                else:
                    for k in range(n):
                        ure[k] = sq[n - k] * re[k]
                        uim[k] = sq[n - k] * im[k]
                        norm += ure[k] * ure[k] + uim[k] * uim[k]
                scale = 1.0 / np.sqrt(norm)
                for k in range(n):
                    re[k] = ure[k] * scale
                    im[k] = uim[k] * scale
                n -= 1
                continue
            theta = phis[t] - Phi
            if use_noise:
                theta += noise[t, m]
            c = np.cos(theta)
            s = np.sin(theta)
            total = 0.0
            cross = 0.0
            for k in range(n):
                a = sq[k + 1]
                b = sq[n - k]
                ur = a * (c * re[k + 1] - s * im[k + 1])
                ui = a * (c * im[k + 1] + s * re[k + 1])
                dr = b * re[k]
                di = b * im[k]
                ure[k] = ur
                uim[k] = ui
                dre[k] = dr
                dim[k] = di
                total += ur * ur + ui * ui + dr * dr + di * di
                cross += ur * dr + ui * di
            p0 = (total + 2.0 * cross) / (2 * n)
            if u_out[t, m] <= p0:
                sign = 1.0
                scale = 1.0 / np.sqrt(2 * n * p0)
                Phi += deltas[m]
            else:
                sign = -1.0
                scale = 1.0 / np.sqrt(total - 2.0 * cross)
                Phi -= deltas[m]
            for k in range(n):
                re[k] = (ure[k] + sign * dre[k]) * scale
                im[k] = (uim[k] + sign * dim[k]) * scale
            Phi = Phi % two_pi
            n -= 1
            M += 1
        est[t] = Phi % two_pi
        detected[t] = M
    return est, detected


@numba.njit(cache=True, nogil=True, fastmath=True)
def _batch_estimates_lossless(amps0, deltas, phis, noise, u_out):
    # Without loss every trajectory holds n = N - m photons at step m, so the
    # state is stored as (photon index, trajectory) and the inner loop runs
    # over trajectories.
    K, N = u_out.shape
    re = np.empty((N + 1, K))
    im = np.zeros((N + 1, K))
    for k in range(N + 1):
        for t in range(K):
            re[k, t] = amps0[k].real
            im[k, t] = amps0[k].imag
    Phi = np.zeros(K)
    c = np.empty(K)
    s = np.empty(K)
    total = np.empty(K)
    cross = np.empty(K)
    sign = np.empty(K)
    scale = np.empty(K)
    sq = np.sqrt(np.arange(N + 2).astype(np.float64))
    use_noise = noise.shape[0] > 0
    two_pi = 2.0 * np.pi
    for m in range(N):
        n = N - m
        for t in range(K):
            theta = phis[t] - Phi[t]
            if use_noise:
                theta += noise[t, m]
            c[t] = np.cos(theta)
            s[t] = np.sin(theta)
            total[t] = 0.0
            cross[t] = 0.0
        for k in range(n):
            a = sq[k + 1]
            b = sq[n - k]
            for t in range(K):
                ur = a * (c[t] * re[k + 1, t] - s[t] * im[k + 1, t])
                ui = a * (c[t] * im[k + 1, t] + s[t] * re[k + 1, t])
                dr = b * re[k, t]
                di = b * im[k, t]
                total[t] += ur * ur + ui * ui + dr * dr + di * di
                cross[t] += ur * dr + ui * di
        for t in range(K):
            p0 = (total[t] + 2.0 * cross[t]) / (2 * n)
            if u_out[t, m] <= p0:
                sign[t] = 1.0
                scale[t] = 1.0 / np.sqrt(2 * n * p0)
                Phi[t] += deltas[m]
            else:
                sign[t] = -1.0
                scale[t] = 1.0 / np.sqrt(total[t] - 2.0 * cross[t])
                Phi[t] -= deltas[m]
            Phi[t] = Phi[t] % two_pi
        for k in range(n):
            a = sq[k + 1]
            b = sq[n - k]
            for t in range(K):
                ur = a * (c[t] * re[k + 1, t] - s[t] * im[k + 1, t])
                ui = a * (c[t] * im[k + 1, t] + s[t] * re[k + 1, t])
                re[k, t] = (ur + sign[t] * b * re[k, t]) * scale[t]
                im[k, t] = (ui + sign[t] * b * im[k, t]) * scale[t]
    est = np.empty(K)
    for t in range(K):
        est[t] = Phi[t] % two_pi
    return est, np.full(K, N, dtype=np.int64)


def draw_batch(config: PhaseSimConfig, n_trials: int, rng: RngStream) -> dict[str, np.ndarray]:
    """Random blocks for ``n_trials`` trajectories, in a fixed consumption order."""
    shape = (n_trials, config.N)
    empty = np.empty((0, config.N))
    phis = TWO_PI * (1.0 - rng.uniform(n_trials))
    noise = rng.gaussian(n_trials * config.N, 0.0, config.sigma).reshape(shape) if config.sigma > 0 else empty
    if config.eta > 0:
        u_loss = rng.uniform(n_trials * config.N).reshape(shape)
        u_arm = rng.uniform(n_trials * config.N).reshape(shape)
    else:
        u_loss = u_arm = empty
    u_out = rng.uniform(n_trials * config.N).reshape(shape)
    return dict(phis=phis, noise=noise, u_loss=u_loss, u_arm=u_arm, u_out=u_out)


def run_batch(
    policy: Policy, config: PhaseSimConfig, draws: dict[str, np.ndarray], force_general: bool = False
):
    """Estimates and detected-photon counts for pre-drawn trajectories."""
    if policy.N != config.N:
        raise ValueError(f"policy has length {policy.N}, config expects N={config.N}")
    amps0 = make_sine_state(config.N).amplitudes
    if config.eta == 0 and not force_general:
        return _batch_estimates_lossless(
            amps0, policy.deltas, draws["phis"], draws["noise"], draws["u_out"]
        )
    return _batch_estimates(
        amps0,
        policy.deltas,
        draws["phis"],
        draws["noise"],
        draws["u_loss"],
        draws["u_arm"],
        draws["u_out"],
        float(config.eta),
    )


def sharpness_from_residuals(residuals: np.ndarray) -> float:
    residuals = np.asarray(residuals, dtype=float)
    return float(np.abs(np.mean(np.exp(1j * residuals))))


def sharpness(policy: Policy, config: PhaseSimConfig, rng: RngStream, K: int | None = None) -> float:
    """One sharpness sample over a fresh uniform training set of ``K`` phases."""
    n_trials = config.K if K is None else int(K)
    draws = draw_batch(config, n_trials, rng)
    est, _ = run_batch(policy, config, draws)
    return sharpness_from_residuals(draws["phis"] - est)


def holevo_variance(S: float) -> float:
    if S > 1.0 + 1e-12 or S < 0 or not math.isfinite(S):
        raise InvalidMetricError(f"sharpness must lie in [0, 1], got {S}")
    if S == 0:
        return math.inf
    return min(S, 1.0) ** -2 - 1.0


def policy_objective(config: PhaseSimConfig) -> ObjectiveSpec:
    """Sharpness of a Markov policy as a stochastic, maximized fitness."""

    def evaluate(position, stream):
        return sharpness(Policy(position), config, stream)

    return ObjectiveSpec(
        dimension=config.N, evaluate=evaluate, deterministic=False, name=f"aqem-N{config.N}"
    )


def random_policy_vh(config: PhaseSimConfig, n_policies: int, rng: RngStream) -> float:
    """Holevo variance of the mean sharpness of uniformly random policies."""
    values = [
        sharpness(Policy(TWO_PI * (1.0 - rng.uniform(config.N))), config, rng)
        for _ in range(n_policies)
    ]
    return holevo_variance(float(np.mean(values)))


def write_policy(path: str | Path, policy: Policy) -> None:
    lines = [f"# N={policy.N}", f"# convention={POLICY_CONVENTION}"]
    lines += [repr(float(d)) for d in policy.deltas]
    Path(path).write_text("\n".join(lines) + "\n")


def read_policy(path: str | Path) -> Policy:
    header: dict[str, str] = {}
    values: list[float] = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
        else:
            values.append(float(line))
    if "N" not in header or int(header["N"]) != len(values):
        raise ValueError(f"{path}: header N does not match {len(values)} values")
    if header.get("convention") != POLICY_CONVENTION:
        raise ValueError(f"{path}: unsupported policy convention {header.get('convention')!r}")
    return Policy(np.array(values))
