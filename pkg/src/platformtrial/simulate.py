"""Monte Carlo conduct of a platform trial, used to check the analytic results.

Each arm's comparison uses only controls recruited while it was open:
patients n(k)+1 .. n_{0,k,j} of the control stream. By default stage
increments are drawn as sums (identical in distribution to drawing every
patient); ``patient_level=True`` draws every outcome.

Stopping decisions of different arms do not interact, so the calendar
order of analyses does not change any outcome. Futility stops the arm in
conduct even when the boundaries are non-binding.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import AllocationSchedule, BoundaryMatrix, as_theta

__all__ = ["SimConfig", "SimResult", "Rate", "simulate", "simulate_statistics", "correlation_check"]

CHUNK = 50_000


@dataclass(frozen=True)
class SimConfig:
    schedule: AllocationSchedule
    boundaries: BoundaryMatrix
    theta: tuple[float, ...]
    replicates: int = 100_000
    seed: int = 1
    theta_clin: float | None = None
    sigma: float = 1.0
    patient_level: bool = False
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "theta", as_theta(self.theta).theta)
        if len(self.theta) != self.schedule.n_arms:
            raise ValueError("one effect per arm is required")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")


@dataclass(frozen=True)
class Rate:
    value: float
    se: float

    @classmethod
    def of(cls, hits: int, total: int) -> "Rate":
        p = hits / total
        return cls(p, math.sqrt(max(p * (1 - p), 0.0) / total))


@dataclass(frozen=True)
class SimResult:
    replicates: int
    fwer: Rate
    pairwise_power: tuple[Rate, ...]
    conjunctive_power: Rate
    disjunctive_power: Rate
    expected_n: float
    expected_n_se: float
    n_histogram: tuple[tuple[int, float], ...] = field(repr=False)
    exit_distribution: tuple[dict, ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "fwer": [self.fwer.value, self.fwer.se],
            "pairwise_power": [[r.value, r.se] for r in self.pairwise_power],
            "conjunctive_power": [self.conjunctive_power.value, self.conjunctive_power.se],
            "disjunctive_power": [self.disjunctive_power.value, self.disjunctive_power.se],
            "expected_n": [self.expected_n, self.expected_n_se],
            "n_histogram": [list(x) for x in self.n_histogram],
        }


def _breakpoints(schedule: AllocationSchedule) -> np.ndarray:
    pts = {0}
    for k in range(schedule.n_arms):
        pts.add(schedule.n_before[k])
        pts.update(schedule.n_control[k])
    return np.array(sorted(pts))


def simulate_statistics(schedule: AllocationSchedule, theta: Sequence[float], reps: int,
                        rng: np.random.Generator, sigma: float = 1.0,
                        patient_level: bool = False) -> list[np.ndarray]:
    """Stagewise Z statistics for every arm, no stopping: list of (reps, J_k) arrays.

    Arms with effect -inf get Z = -inf throughout.
    """
    K = schedule.n_arms
    pts = _breakpoints(schedule)
    if patient_level:
        ctrl = rng.standard_normal((reps, int(pts[-1]))) * sigma
        cum = np.concatenate([np.zeros((reps, 1)), np.cumsum(ctrl, axis=1)], axis=1)
        csum = cum[:, pts]
    else:
        seg = np.diff(pts).astype(float)
        draws = rng.standard_normal((reps, seg.size)) * np.sqrt(seg) * sigma
        csum = np.concatenate([np.zeros((reps, 1)), np.cumsum(draws, axis=1)], axis=1)
    where = {int(p): i for i, p in enumerate(pts)}
    out = []
    for k in range(K):
        n_act = np.asarray(schedule.n_active[k], dtype=float)
        if theta[k] == -math.inf:
            out.append(np.full((reps, n_act.size), -math.inf))
            continue
        mu = theta[k]
        if patient_level:
            a = rng.standard_normal((reps, int(n_act[-1]))) * sigma + mu
            asum = np.cumsum(a, axis=1)[:, n_act.astype(int) - 1]
        else:
            inc = np.diff(np.concatenate([[0.0], n_act]))
            a = rng.standard_normal((reps, inc.size)) * np.sqrt(inc) * sigma + mu * inc
            asum = np.cumsum(a, axis=1)
        start = csum[:, where[schedule.n_before[k]]][:, None]
        stop = csum[:, [where[c] for c in schedule.n_control[k]]]
        m = np.asarray(schedule.n_control[k], dtype=float) - schedule.n_before[k]
        diff = asum / n_act - (stop - start) / m
        out.append(diff / (sigma * np.sqrt(1.0 / n_act + 1.0 / m)))
    return out


def _exits(z: np.ndarray, upper: np.ndarray, lower: np.ndarray):
    """Exit stage (1-based) and decision (1 reject, 0 futility) per replicate."""
    J = upper.size
    rej = z >= upper
    fut = z <= lower
    stop = rej | fut
    stop[:, -1] = True
    stage = np.argmax(stop, axis=1)
    rows = np.arange(z.shape[0])
    decision = rej[rows, stage].astype(np.int8)
    return stage + 1, decision


def _run_chunk(config: SimConfig, reps: int, seed_seq: np.random.SeedSequence):
    rng = np.random.default_rng(seed_seq)
    sched, bounds = config.schedule, config.boundaries
    z = simulate_statistics(sched, config.theta, reps, rng, config.sigma, config.patient_level)
    K = sched.n_arms
    stages = np.empty((reps, K), dtype=np.int64)
    decisions = np.empty((reps, K), dtype=np.int8)
    for k in range(K):
        stages[:, k], decisions[:, k] = _exits(z[k], bounds.upper[k], bounds.lower[k])
    n_act = np.array([sched.n_active[k] for k in range(K)], dtype=np.int64)
    n_ctl = np.array([sched.n_control[k] for k in range(K)], dtype=np.int64)
    idx = stages - 1
    ar = np.arange(K)
    total = n_act[ar, idx].sum(axis=1) + n_ctl[ar, idx].max(axis=1)
    return stages, decisions, total


def simulate(config: SimConfig) -> SimResult:
    """Run the trial ``config.replicates`` times; bit-identical for a fixed seed.

    Replicates are split into fixed-size chunks, each with its own spawned
    seed, so the result does not depend on ``threads``.
    """
    sizes = [CHUNK] * (config.replicates // CHUNK)
    if config.replicates % CHUNK:
        sizes.append(config.replicates % CHUNK)
    seeds = np.random.SeedSequence(config.seed).spawn(len(sizes))
    jobs = list(zip(sizes, seeds))
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            parts = list(pool.map(lambda j: _run_chunk(config, *j), jobs))
    else:
        parts = [_run_chunk(config, *j) for j in jobs]
    stages = np.concatenate([p[0] for p in parts])
    decisions = np.concatenate([p[1] for p in parts])
    total = np.concatenate([p[2] for p in parts])
    R, K = decisions.shape
    theta = config.theta

    null = [k for k, t in enumerate(theta) if t <= 0 and t != -math.inf]
    fwer_hits = int(decisions[:, null].any(axis=1).sum()) if null else 0
    pairwise = tuple(Rate.of(int(decisions[:, k].sum()), R) for k in range(K))
    if config.theta_clin is None:
        relevant = []
    else:
        relevant = [k for k, t in enumerate(theta) if t >= config.theta_clin]
    conj_hits = int(decisions[:, relevant].all(axis=1).sum()) if relevant else R
    disj_hits = int(decisions.any(axis=1).sum())

    values, counts = np.unique(total, return_counts=True)
    hist = tuple((int(v), c / R) for v, c in zip(values, counts))
    exits = []
    for k in range(K):
        keys, c = np.unique(stages[:, k] * 2 + decisions[:, k], return_counts=True)
        exits.append({(int(key) // 2, int(key) % 2): cnt / R for key, cnt in zip(keys, c)})
    return SimResult(
        replicates=R,
        fwer=Rate.of(fwer_hits, R),
        pairwise_power=pairwise,
        conjunctive_power=Rate.of(conj_hits, R),
        disjunctive_power=Rate.of(disj_hits, R),
        expected_n=float(total.mean()),
        expected_n_se=float(total.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0,
        n_histogram=hist,
        exit_distribution=tuple(exits),
    )


def correlation_check(schedule: AllocationSchedule, replicates: int = 1_000_000, seed: int = 1,
                      patient_level: bool = False) -> np.ndarray:
    """Empirical correlation of all stagewise Z statistics (arm-major order), no stopping."""
    sizes = [CHUNK] * (replicates // CHUNK)
    if replicates % CHUNK:
        sizes.append(replicates % CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    dim = sum(len(r) for r in schedule.n_active)
    s1 = np.zeros(dim)
    s2 = np.zeros((dim, dim))
    zero = (0.0,) * schedule.n_arms
    for reps, ss in zip(sizes, seeds):
        z = np.concatenate(simulate_statistics(schedule, zero, reps, np.random.default_rng(ss),
                                               patient_level=patient_level), axis=1)
        s1 += z.sum(axis=0)
        s2 += z.T @ z
    mean = s1 / replicates
    cov = s2 / replicates - np.outer(mean, mean)
    sd = np.sqrt(np.diag(cov))
    return cov / np.outer(sd, sd)
