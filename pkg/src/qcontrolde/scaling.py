"""Power-law scaling ledger and the accept-reject gate for per-N policies.

Accepted ``(N, V_H)`` points are fit by ordinary least squares on
``(log N, log V_H)``.  A new policy at ``N`` is accepted when its
``log V_H`` lies within ``delta_y`` of the line's prediction, where
``delta_y`` is the regression confidence half-width with the Student-t
quantile replaced by the normal quantile.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Callable, Optional, Sequence

import numpy as np

from .rng import derive_seed

LEDGER_COLUMNS = ["N", "V_H", "log_residual", "delta_y", "accepted", "mode", "seed"]


class InsufficientDataError(ValueError):
    pass


class InvalidMetricError(ValueError):
    pass


class CampaignAborted(RuntimeError):
    def __init__(self, N: int, attempts: int, ledger: "ScalingLedger"):
        super().__init__(f"no policy accepted at N={N} after {attempts} attempts")
        self.N = N
        self.attempts = attempts
        self.ledger = ledger


def normal_quantile(confidence: float) -> float:
    """Two-sided normal critical value, e.g. 2.3263 for 0.98."""
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    n_points: int
    residual_ss: float
    x_mean: float
    x_ss: float

    def predict(self, x: float) -> float:
        return self.intercept + self.slope * x

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RegressionFit":
        return cls(**json.loads(text))


def fit_line(x: Sequence[float], y: Sequence[float]) -> RegressionFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3:
        raise InsufficientDataError(f"need at least 3 points, got {n}")
    x_mean = float(x.mean())
    dx = x - x_mean
    x_ss = float(dx @ dx)
    if x_ss == 0:
        raise InsufficientDataError("all x values coincide")
    slope = float(dx @ (y - y.mean()) / x_ss)
    intercept = float(y.mean() - slope * x_mean)
    residuals = y - (intercept + slope * x)
    return RegressionFit(slope, intercept, n, float(residuals @ residuals), x_mean, x_ss)


def fit_loglog(points: Sequence[tuple[float, float]]) -> RegressionFit:
    """OLS of ``log V_H`` against ``log N`` (natural logs)."""
    points = list(points)
    for N, vh in points:
        if not vh > 0:
            raise InvalidMetricError(f"V_H must be positive, got {vh} at N={N}")
    return fit_line([math.log(N) for N, _ in points], [math.log(v) for _, v in points])


def prediction_interval(fit: RegressionFit, x_new: float, confidence: float = 0.98) -> float:
    if fit.n_points < 3:
        raise InsufficientDataError("delta_y needs at least 3 points")
    s2 = fit.residual_ss / (fit.n_points - 2)
    leverage = 1.0 / fit.n_points + (x_new - fit.x_mean) ** 2 / fit.x_ss
    return normal_quantile(confidence) * math.sqrt(s2 * leverage)


@dataclass
class LedgerPoint:
    N: int
    V_H: float
    log_residual: float = math.nan
    delta_y: float = math.nan
    accepted: bool = True
    mode: str = "fixed"
    seed: int = 0


@dataclass
class ScalingLedger:
    points: list[LedgerPoint] = field(default_factory=list)
    confidence: float = 0.98

    @property
    def fit(self) -> RegressionFit:
        return fit_loglog([(p.N, p.V_H) for p in self.points])

    def add(self, point: LedgerPoint) -> None:
        if not point.V_H > 0:
            raise InvalidMetricError(f"V_H must be positive, got {point.V_H}")
        self.points.append(point)
        self.points.sort(key=lambda p: p.N)

    def check(self, N: int, V_H: float) -> tuple[bool, float, float]:
        """``(accept, log residual, delta_y)`` for a candidate point."""
        if not V_H > 0:
            raise InvalidMetricError(f"V_H must be positive, got {V_H}")
        fit = self.fit
        x = math.log(N)
        residual = math.log(V_H) - fit.predict(x)
        delta = prediction_interval(fit, x, self.confidence)
        return abs(residual) <= delta, residual, delta

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LEDGER_COLUMNS)
            for p in self.points:
                writer.writerow(
                    [p.N, repr(p.V_H), repr(p.log_residual), repr(p.delta_y), int(p.accepted), p.mode, p.seed]
                )
        tmp.replace(path)

    @classmethod
    def from_csv(cls, path: str | Path, confidence: float = 0.98) -> "ScalingLedger":
        ledger = cls(confidence=confidence)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                ledger.add(
                    LedgerPoint(
                        N=int(row["N"]),
                        V_H=float(row["V_H"]),
                        log_residual=float(row["log_residual"]),
                        delta_y=float(row["delta_y"]),
                        accepted=bool(int(row["accepted"])),
                        mode=row["mode"],
                        seed=int(row["seed"]),
                    )
                )
        return ledger


def accept_policy(ledger: ScalingLedger, N: int, V_H_candidate: float, seed: int = 0) -> bool:
    """Gate a candidate against the current fit; accepted points join the ledger."""
    ok, residual, delta = ledger.check(N, V_H_candidate)
    if ok:
        ledger.add(LedgerPoint(N, V_H_candidate, residual, delta, True, "accept-reject", seed))
    return ok


@dataclass
class Attempt:
    N: int
    attempt: int
    seed: int
    V_H: float
    accepted: bool
    log_residual: float
    delta_y: float
    wall_seconds: float
    policy: np.ndarray


@dataclass
class CampaignResult:
    ledger: ScalingLedger
    policies: dict[int, np.ndarray]
    attempts: list[Attempt]


OptimizeFn = Callable[[int, int], np.ndarray]
MetricFn = Callable[[int, np.ndarray, int], float]


def run_scaling_campaign(
    optimize: OptimizeFn,
    holevo_of: MetricFn,
    N_range: Sequence[int],
    master_seed: int = 0,
    switch_over_N: Optional[int] = None,
    retry_cap: int = 20,
    confidence: float = 0.98,
    ledger_path: Optional[str | Path] = None,
    on_attempt: Optional[Callable[[Attempt], None]] = None,
) -> CampaignResult:
    """Optimize a policy for every N in ascending order.

    ``optimize(N, seed)`` returns a policy vector; ``holevo_of(N, policy, seed)``
    scores it.  Below ``switch_over_N`` (or always, when it is None) the
    first policy is appended unconditionally.  From ``switch_over_N`` on,
    fresh-seed re-optimizations repeat until :func:`accept_policy` passes;
    after ``retry_cap`` failures :class:`CampaignAborted` is raised with
    the accepted points already persisted.
    """
    N_range = list(N_range)
    if N_range != sorted(N_range):
        raise ValueError("N_range must be ascending")
    ledger = ScalingLedger(confidence=confidence)
    policies: dict[int, np.ndarray] = {}
    attempts: list[Attempt] = []

    def persist():
        if ledger_path is not None:
            ledger.to_csv(ledger_path)

    persist()
    for N in N_range:
        gated = switch_over_N is not None and N >= switch_over_N
        if gated and len(ledger.points) < 3:
            raise ValueError(f"accept-reject at N={N} needs 3 prior points in the ledger")
        cap = retry_cap if gated else 1
        for attempt in range(cap):
            seed = derive_seed(master_seed, "campaign", N, attempt)
            t0 = time.perf_counter()
            policy = np.asarray(optimize(N, seed))
            vh = float(holevo_of(N, policy, seed))
            wall = time.perf_counter() - t0
            if gated:
                ok, residual, delta = ledger.check(N, vh)
            else:
                ok, residual, delta = True, math.nan, math.nan
                if len(ledger.points) >= 3:
                    _, residual, delta = ledger.check(N, vh)
            record = Attempt(N, attempt, seed, vh, ok, residual, delta, wall, policy)
            attempts.append(record)
            if on_attempt is not None:
                on_attempt(record)
            if ok:
                mode = "accept-reject" if gated else "fixed"
                ledger.add(LedgerPoint(N, vh, residual, delta, True, mode, seed))
                policies[N] = policy
                persist()
                break
        else:
            persist()
            raise CampaignAborted(N, cap, ledger)
    return CampaignResult(ledger, policies, attempts)
