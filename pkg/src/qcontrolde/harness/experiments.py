"""Campaign runners behind ``qcontrolde run``.

Each runner writes its metric CSVs into the run directory together with a
copy of the config and ``manifest.json``.  Metric CSVs hold only values
fixed by config and seed; wall-clock time goes to ``timing.csv`` and the
manifest so that reruns reproduce the metric files byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import __version__
from ..gate import (
    GateProblem,
    HamiltonianSpec,
    PulseSequence,
    gate_fidelity,
    gate_objective,
    gaussian_filter,
    read_pulses,
    robustness_scan,
    toffoli,
    write_pulses,
)
from ..optim import (
    Bounds,
    DeConfig,
    HillClimbConfig,
    NrDeConfig,
    ObjectiveSpec,
    OptimizeResult,
    PsoConfig,
    SussadeConfig,
    benchmark,
    de_run,
    hill_climb_run,
    nr_de_run,
    pso_run,
    sussade_run,
)
from ..phase import POLICY_CONVENTION, PhaseSimConfig, Policy, holevo_variance, policy_objective, random_policy_vh, sharpness, write_policy
from ..rng import GENERATOR_FAMILY, RngStream, derive_seed
from ..scaling import Attempt, CampaignAborted, ScalingLedger, run_scaling_campaign
from .config import ConfigError, RunConfig, dump_config

OUTPUT_ROOT_ENV = "QCONTROLDE_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    """Atomic CSV write with round-trip float formatting."""
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    tmp.replace(path)


def output_dir(config: RunConfig) -> Path:
    """``output_dir`` under the root from the environment, else as given."""
    root = os.environ.get(OUTPUT_ROOT_ENV)
    target = Path(config.output_dir)
    if root:
        if target.is_absolute():
            target = Path(*target.parts[1:])
        return Path(root) / target
    return target


def _versions() -> dict:
    import numba
    import scipy

    return {
        "qcontrolde": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


@dataclass
class RunOutcome:
    status: int
    run_dir: Path
    artifacts: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


# optimizer dispatch


OptimizerFn = Callable[[ObjectiveSpec, Bounds, int], OptimizeResult]


def make_optimizer(
    config: RunConfig,
    name: str,
    maximize: bool,
    iterations: int,
    max_evaluations: Optional[int] = None,
) -> OptimizerFn:
    """Return ``run(objective, bounds, seed)`` for the named optimizer."""
    opt = config.optimizer
    de = opt.de

    def de_config(seed):
        return DeConfig(
            population_size=de.population_size,
            mutation_rate=de.mutation_rate,
            crossover_rate=de.crossover_rate,
            maximize=maximize,
            max_iterations=iterations,
            seed=seed,
            workers=config.workers,
            init_fraction=de.init_fraction,
        )

    def noise_config(seed):
        n = opt.noise
        return NrDeConfig(de_config(seed), n.init_samples, n.per_iteration_samples, n.final_samples)

    if name == "de":
        return lambda objective, bounds, seed: de_run(objective, de_config(seed), bounds, max_evaluations)
    if name == "nr-de":
        return lambda objective, bounds, seed: nr_de_run(
            objective, noise_config(seed), bounds, max_evaluations=max_evaluations
        )
    if name == "sussade":
        s = opt.sussade

        def run(objective, bounds, seed):
            cfg = SussadeConfig(de_config(seed), s.F_l, s.F_u, s.kappa1, s.kappa2, s.switching_rate, s.subspace_size)
            return sussade_run(objective, cfg, bounds, max_evaluations, noise=noise_config(seed))

        return run
    if name == "pso":
        p = opt.pso

        def run(objective, bounds, seed):
            cfg = PsoConfig(
                p.population_size, p.inertia, p.c1, p.c2, p.init_velocity, maximize, iterations, seed, config.workers
            )
            return pso_run(objective, cfg, bounds, max_evaluations)

        return run
    if name == "hill-climb":
        h = opt.hill_climb
        return lambda objective, bounds, seed: hill_climb_run(
            objective, HillClimbConfig(h.step_sigma, maximize, iterations, seed), bounds, max_evaluations
        )
    raise ValueError(f"unknown optimizer {name!r}")


# phase-estimation scaling


def _sim_config(config: RunConfig, N: int, training: bool = False) -> PhaseSimConfig:
    ph = config.phase
    eta = 0.0 if training and not ph.train_with_loss else ph.eta
    return PhaseSimConfig(N=N, sigma=ph.sigma, eta=eta, K=ph.K, seed=config.seed)


def score_policy(config: RunConfig, N: int, policy: np.ndarray, seed: int) -> float:
    """Holevo variance of a finished policy on a fresh set of phases."""
    sim = _sim_config(config, N)
    trials = config.phase.score_trials_factor * 10 * N * N
    S = sharpness(Policy(policy), sim, RngStream(seed, ("score", N)), K=trials)
    return holevo_variance(S)


def _phase_campaign(config: RunConfig, optimizer_name: str, run_dir: Path, suffix: str = "") -> tuple[dict, Optional[CampaignAborted]]:
    ph = config.phase
    if ph.max_evaluations is not None:
        # budget-limited: the iteration cap must not bind first
        iterations_at = lambda N: 10**9
    else:
        iterations_at = ph.iterations_at
    policy_dir = run_dir / (f"policies_{suffix}" if suffix else "policies")
    policy_dir.mkdir(parents=True, exist_ok=True)
    tag = f"_{suffix}" if suffix else ""
    ledger_path = run_dir / f"ledger{tag}.csv"
    attempts: list[Attempt] = []
    evaluations: dict[tuple[int, int], int] = {}

    def optimize(N, seed):
        run = make_optimizer(config, optimizer_name, True, iterations_at(N), ph.max_evaluations)
        result = run(policy_objective(_sim_config(config, N, training=True)), Bounds.phases(N), seed)
        evaluations[(N, seed)] = result.n_evaluations
        return result.best.position

    def on_attempt(a: Attempt):
        attempts.append(a)
        if a.accepted:
            write_policy(policy_dir / f"policy_N{a.N}.txt", Policy(a.policy))

    aborted = None
    try:
        run_scaling_campaign(
            optimize,
            lambda N, policy, seed: score_policy(config, N, policy, seed),
            ph.N_values,
            master_seed=derive_seed(config.seed, "phase", optimizer_name),
            switch_over_N=ph.switch_over_N,
            retry_cap=ph.retry_cap,
            confidence=ph.confidence,
            ledger_path=ledger_path,
            on_attempt=on_attempt,
        )
    except CampaignAborted as exc:
        aborted = exc

    write_csv(
        run_dir / f"attempts{tag}.csv",
        ["N", "attempt", "seed", "V_H", "accepted", "log_residual", "delta_y", "evaluations"],
        [(a.N, a.attempt, a.seed, a.V_H, a.accepted, a.log_residual, a.delta_y, evaluations[(a.N, a.seed)]) for a in attempts],
    )
    write_csv(
        run_dir / f"timing{tag}.csv",
        ["N", "attempt", "wall_seconds"],
        [(a.N, a.attempt, round(a.wall_seconds, 3)) for a in attempts],
    )
    ledger = ScalingLedger.from_csv(ledger_path, ph.confidence)
    summary = {"points": len(ledger.points)}
    if len(ledger.points) >= 3:
        summary["slope"] = ledger.fit.slope
    if ph.baseline_policies > 0:
        rows = []
        for N in ph.N_values:
            rng = RngStream(config.seed, ("baseline", N))
            rows.append((N, random_policy_vh(_sim_config(config, N), ph.baseline_policies, rng)))
        write_csv(run_dir / f"baseline{tag}.csv", ["N", "V_H_random"], rows)
    if aborted is not None:
        summary["aborted_at_N"] = aborted.N
    return summary, aborted


def run_phase_scaling(config: RunConfig, run_dir: Path) -> RunOutcome:
    summary, aborted = _phase_campaign(config, config.optimizer.name, run_dir)
    return RunOutcome(EXIT_ABORT if aborted else EXIT_OK, run_dir, summary=summary)


def run_compare(config: RunConfig, run_dir: Path) -> RunOutcome:
    summary, status = {}, EXIT_OK
    for name in config.compare.optimizers:
        summary[name], aborted = _phase_campaign(config, name, run_dir, suffix=name)
        if aborted is not None:
            status = EXIT_ABORT
    return RunOutcome(status, run_dir, summary=summary)


# gate design and robustness


def gate_problem(config: RunConfig) -> GateProblem:
    g = config.gate
    hamiltonian = HamiltonianSpec(n_qubits=g.n_qubits, coupling=g.coupling, detunings=tuple(g.detunings))
    return GateProblem(toffoli(), hamiltonian, dt=g.dt, T=g.T, amplitude_bound=g.amplitude_bound)


def run_gate_design(config: RunConfig, run_dir: Path) -> RunOutcome:
    g = config.gate
    problem = gate_problem(config)
    objective = gate_objective(problem, g.filter_sigma)
    run = make_optimizer(config, config.optimizer.name, True, 10**9, g.max_evaluations)
    rows, timing = [], []
    for r in range(g.repeats):
        seed = derive_seed(config.seed, "gate", r)
        t0 = time.perf_counter()
        result = run(objective, problem.bounds(), seed)
        timing.append((r, round(time.perf_counter() - t0, 3)))
        pulses = PulseSequence.from_vector(result.best.position, problem.n_lines, problem.dt)
        write_pulses(run_dir / f"pulses_r{r}.csv", pulses)
        write_pulses(run_dir / f"pulses_r{r}_filtered.csv", gaussian_filter(pulses, g.filter_sigma))
        write_csv(
            run_dir / f"convergence_r{r}.csv",
            ["iteration", "best_fidelity"],
            enumerate(result.history),
        )
        fidelity = gate_fidelity(pulses, problem, g.filter_sigma)
        rows.append((r, seed, fidelity, result.n_evaluations, result.iterations))
    write_csv(run_dir / "results.csv", ["repeat", "seed", "fidelity", "evaluations", "iterations"], rows)
    write_csv(run_dir / "timing.csv", ["repeat", "wall_seconds"], timing)
    fidelities = [row[2] for row in rows]
    return RunOutcome(EXIT_OK, run_dir, summary={"fidelity": fidelities})


def run_robustness(config: RunConfig, run_dir: Path) -> RunOutcome:
    rb = config.robustness
    source = Path(rb.pulses)
    if not source.is_absolute() and config.base_dir is not None:
        source = Path(config.base_dir) / source
    try:
        pulses = read_pulses(source)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("robustness.pulses", f"cannot load {source}: {exc}") from exc
    problem = gate_problem(config)
    if pulses.amplitudes.shape != (problem.n_lines, problem.T):
        raise ConfigError("robustness.pulses", f"pulse shape {pulses.amplitudes.shape} does not match the gate section")
    curve = robustness_scan(pulses, problem, rb.grid, rb.trials, RngStream(config.seed, ("robustness",)), rb.filter_sigma)
    write_csv(
        run_dir / "robustness.csv",
        ["delta_eps", "mean_fidelity", "std_error"],
        zip(curve.delta_eps, curve.mean_fidelity, curve.std_error),
    )
    return RunOutcome(EXIT_OK, run_dir, summary={"F0": float(curve.mean_fidelity[0]) if len(curve.delta_eps) else None})


# benchmarks


def run_benchmark(config: RunConfig, run_dir: Path) -> RunOutcome:
    b = config.benchmark
    rows, timing = [], []
    for fn in b.functions:
        objective, bounds = benchmark(fn, b.dimension, b.noise_sigma)
        for name in b.optimizers:
            run = make_optimizer(config, name, False, 10**9, b.max_evaluations)
            for r in range(b.repeats):
                seed = derive_seed(config.seed, "benchmark", r)
                t0 = time.perf_counter()
                result = run(objective, bounds, seed)
                timing.append((fn, name, r, round(time.perf_counter() - t0, 3)))
                write_csv(
                    run_dir / f"convergence_{fn}_{name}_r{r}.csv",
                    ["iteration", "best"],
                    enumerate(result.history),
                )
                rows.append((fn, name, r, seed, result.best.mean_fitness, result.n_evaluations, result.iterations))
    write_csv(run_dir / "summary.csv", ["function", "optimizer", "repeat", "seed", "best", "evaluations", "iterations"], rows)
    write_csv(run_dir / "timing.csv", ["function", "optimizer", "repeat", "wall_seconds"], timing)
    return RunOutcome(EXIT_OK, run_dir)


RUNNERS = {
    "phase-scaling": run_phase_scaling,
    "compare": run_compare,
    "gate-design": run_gate_design,
    "robustness": run_robustness,
    "benchmark": run_benchmark,
}


def run_experiment(config: RunConfig) -> RunOutcome:
    """Dispatch, then write ``config.yaml`` and ``manifest.json``.

    A campaign abort still leaves every artifact persisted so far plus a
    manifest with ``status: aborted``.
    """
    config.validate()
    run_dir = output_dir(config)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.yaml").write_text(dump_config(config))
    started = time.time()
    t0 = time.perf_counter()
    outcome = RUNNERS[config.experiment](config, run_dir)
    outcome.artifacts = sorted(p.name for p in run_dir.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "experiment": config.experiment,
        "status": "ok" if outcome.status == EXIT_OK else "aborted",
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "generator_family": GENERATOR_FAMILY,
        "policy_convention": POLICY_CONVENTION,
        "versions": _versions(),
        "started_unix": round(started, 3),
        "wall_seconds": round(time.perf_counter() - t0, 3),
        "summary": outcome.summary,
        "artifacts": outcome.artifacts,
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    return outcome


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


# plot data


LEDGER_PLOT = ["N", "V_H", "log10_N", "log10_V_H"]
CURVE_PLOT = ["delta_eps", "F", "stderr"]


def emit_plotdata(artifact: str | Path, out: Optional[str | Path] = None) -> Path:
    """Plot-ready CSV next to a ledger or robustness artifact.

    Ledgers give ``N, V_H, log10_N, log10_V_H``; robustness curves give
    ``delta_eps, F, stderr`` in grid order.  An artifact without data rows
    yields a header-only file.
    """
    artifact = Path(artifact)
    with open(artifact, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        records = list(reader)
    if out is None:
        out = artifact.with_name(artifact.stem + "_plot.csv")
    out = Path(out)
    if {"N", "V_H"} <= set(columns):
        rows = []
        for rec in records:
            N, vh = int(rec["N"]), float(rec["V_H"])
            rows.append((N, vh, math.log10(N), math.log10(vh)))
        write_csv(out, LEDGER_PLOT, rows)
    elif {"delta_eps", "mean_fidelity", "std_error"} <= set(columns):
        rows = [(float(r["delta_eps"]), float(r["mean_fidelity"]), float(r["std_error"])) for r in records]
        write_csv(out, CURVE_PLOT, rows)
    else:
        raise ValueError(f"{artifact}: not a ledger (N, V_H) or robustness curve (delta_eps, mean_fidelity, std_error)")
    return out
