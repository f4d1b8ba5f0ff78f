"""Error rates, powers and sample-size distributions of a platform design.

Every quantity is a sum of rectangle probabilities over stage vectors.
For arm k exiting at analysis j the per-arm limits are, with drift d_i:

* continuation at analyses 1..j-1: (l_i - d_i, u_i - d_i)
* rejection at j:                   (u_j - d_j, +inf)
* futility at j:                    (-inf, l_j - d_j)
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .model import (
    AllocationSchedule,
    BoundaryMatrix,
    OutcomeCell,
    as_theta,
    correlation_matrix,
    drift_matrix,
)
from .mvn import BOUNDARY_SETTINGS, ESS_SETTINGS, MvnSettings, mvn_prob, mvn_prob_batch

__all__ = [
    "OperatingCharacteristics",
    "SampleSizeDistribution",
    "fwer_global_null",
    "fwer",
    "pairwise_power",
    "conjunctive_power",
    "disjunctive_power",
    "outcome_probability",
    "outcome_cells",
    "sample_size_of_cell",
    "expected_sample_size",
    "expected_n_survival",
    "operating_characteristics",
]

REJECT, FAIL = 1, 0


def _arm_limits(bounds: BoundaryMatrix, k: int, stage: int, decision: int, drift):
    u = bounds.upper[k, :stage]
    lo = bounds.lower[k, :stage]
    a = lo.copy()
    b = u.copy()
    if decision == REJECT:
        a[-1], b[-1] = u[-1], math.inf
    else:
        a[-1], b[-1] = -math.inf, lo[-1]
    d = drift[:stage]
    return a - d, b - d


def _restricted(schedule, arms, stage_vector):
    # correlation among the selected arms only (others marginalised out)
    return _restricted_cached(schedule, tuple(arms), tuple(stage_vector))


@lru_cache(maxsize=4096)
def _restricted_cached(schedule, arms, stage_vector):
    corr = correlation_matrix(_SubSchedule(schedule, arms), stage_vector)
    corr.setflags(write=False)
    return corr


class _SubSchedule:
    # lightweight view exposing only the arms in ``idx``
    def __init__(self, schedule: AllocationSchedule, idx):
        self.n_active = tuple(schedule.n_active[k] for k in idx)
        self.n_control = tuple(schedule.n_control[k] for k in idx)
        self.n_before = tuple(schedule.n_before[k] for k in idx)
        self.n_arms = len(idx)
        self.stages = tuple(len(r) for r in self.n_active)


def _sum_rectangles(schedule, bounds, arms, drifts, decision, settings):
    """Sum over stage vectors of P(every arm in ``arms`` exits with ``decision``)."""
    total, err = 0.0, 0.0
    ranges = [range(1, bounds.stages + 1) for _ in arms]
    for sv in itertools.product(*ranges):
        lows, ups = [], []
        for k, j in zip(arms, sv):
            a, b = _arm_limits(bounds, k, j, decision, drifts[k])
            lows.append(a)
            ups.append(b)
        a = np.concatenate(lows)
        b = np.concatenate(ups)
        if np.any(b <= a):
            continue
        corr = _restricted(schedule, arms, sv)
        r = mvn_prob(a, b, corr, settings)
        total += r.prob
        err += r.error
    return total, err


def fwer_global_null(schedule: AllocationSchedule, bounds: BoundaryMatrix,
                     settings: MvnSettings = BOUNDARY_SETTINGS) -> float:
    """P(reject at least one H0k) when every arm has zero effect.

    Non-binding futility boundaries are ignored here (interim lower limits
    replaced by -inf).
    """
    b = bounds.for_type_one_error()
    drifts = [np.zeros(bounds.stages)] * schedule.n_arms
    p_none, _ = _sum_rectangles(schedule, b, range(schedule.n_arms), drifts, FAIL, settings)
    return float(min(max(1.0 - p_none, 0.0), 1.0))


def fwer(schedule, bounds, theta, settings: MvnSettings = BOUNDARY_SETTINGS, sigma: float = 1.0) -> float:
    """P(reject at least one true null) under effects ``theta``."""
    theta = as_theta(theta)
    nulls = [k for k, t in enumerate(theta) if t <= 0 and t != -math.inf]
    if not nulls:
        return 0.0
    b = bounds.for_type_one_error()
    drifts = drift_matrix(schedule, theta, sigma)
    p_none, _ = _sum_rectangles(schedule, b, nulls, drifts, FAIL, settings)
    return float(min(max(1.0 - p_none, 0.0), 1.0))


def pairwise_power(schedule, bounds, k: int, theta: float,
                   settings: MvnSettings = BOUNDARY_SETTINGS, sigma: float = 1.0) -> float:
    """P(arm k is declared superior) when its effect is ``theta``."""
    if theta == -math.inf:
        return 0.0
    if not math.isfinite(theta):
        raise ValueError("theta must be finite or -inf")
    thetas = [0.0] * schedule.n_arms
    thetas[k] = theta
    drifts = drift_matrix(schedule, thetas, sigma)
    p, _ = _sum_rectangles(schedule, bounds, [k], drifts, REJECT, settings)
    return float(min(max(p, 0.0), 1.0))


def conjunctive_power(schedule, bounds, theta, theta_clin: float,
                      settings: MvnSettings = BOUNDARY_SETTINGS, sigma: float = 1.0) -> float:
    """P(every arm with effect >= theta_clin is declared superior).

    Returns 1 when no arm is clinically relevant.
    """
    theta = as_theta(theta)
    relevant = [k for k, t in enumerate(theta) if t >= theta_clin]
    if not relevant:
        return 1.0
    drifts = drift_matrix(schedule, theta, sigma)
    p, _ = _sum_rectangles(schedule, bounds, relevant, drifts, REJECT, settings)
    return float(min(max(p, 0.0), 1.0))


def disjunctive_power(schedule, bounds, theta,
                      settings: MvnSettings = BOUNDARY_SETTINGS, sigma: float = 1.0) -> float:
    """P(at least one arm is declared superior); -inf arms can never be."""
    theta = as_theta(theta)
    arms = [k for k, t in enumerate(theta) if t != -math.inf]
    if not arms:
        return 0.0
    drifts = drift_matrix(schedule, theta, sigma)
    p_none, _ = _sum_rectangles(schedule, bounds, arms, drifts, FAIL, settings)
    return float(min(max(1.0 - p_none, 0.0), 1.0))


def sample_size_of_cell(schedule: AllocationSchedule, cell: OutcomeCell | Sequence[int]) -> int:
    stages = cell.stages if isinstance(cell, OutcomeCell) else tuple(cell)
    return schedule.cell_sample_size(stages)


def outcome_probability(schedule, bounds, theta, cell: OutcomeCell,
                        settings: MvnSettings = ESS_SETTINGS, sigma: float = 1.0) -> float:
    """Probability that each arm exits at ``cell.stages`` with ``cell.decisions``."""
    theta = as_theta(theta)
    if len(cell.stages) != schedule.n_arms:
        raise ValueError("cell does not match the number of arms")
    drifts = drift_matrix(schedule, theta, sigma)
    arms, lows, ups, sv = [], [], [], []
    for k, (j, q) in enumerate(zip(cell.stages, cell.decisions)):
        if j > bounds.stages:
            raise ValueError("stage beyond the final analysis")
        if theta[k] == -math.inf:
            if (j, q) != (1, FAIL):
                return 0.0
            continue
        a, b = _arm_limits(bounds, k, j, q, drifts[k])
        arms.append(k)
        lows.append(a)
        ups.append(b)
        sv.append(j)
    if not arms:
        return 1.0
    corr = _restricted(schedule, arms, sv)
    return mvn_prob(np.concatenate(lows), np.concatenate(ups), corr, settings).prob


@dataclass(frozen=True)
class CellProbability:
    cell: OutcomeCell
    prob: float
    total_n: int


def outcome_cells(schedule, bounds, theta, settings: MvnSettings = ESS_SETTINGS,
                  sigma: float = 1.0) -> list[CellProbability]:
    """Probabilities of every (stage vector, decision vector) outcome.

    Arms with effect -inf always exit at their first analysis for futility.
    Decision vectors sharing a stage vector are integrated in one batch.
    """
    theta = as_theta(theta)
    K, J = schedule.n_arms, bounds.stages
    drifts = drift_matrix(schedule, theta, sigma)
    live = [k for k in range(K) if theta[k] != -math.inf]
    out = []
    for sv in itertools.product(range(1, J + 1), repeat=len(live)):
        stages = [1] * K
        for k, j in zip(live, sv):
            stages[k] = j
        qs = list(itertools.product((FAIL, REJECT), repeat=len(live)))
        if live:
            lows, ups = [], []
            for q in qs:
                parts = [_arm_limits(bounds, k, j, qk, drifts[k]) for k, j, qk in zip(live, sv, q)]
                lows.append(np.concatenate([p[0] for p in parts]))
                ups.append(np.concatenate([p[1] for p in parts]))
            corr = _restricted(schedule, live, sv)
            probs, _, _ = mvn_prob_batch(np.array(lows), np.array(ups), corr, settings)
        else:
            probs = np.ones(1)
        total_n = schedule.cell_sample_size(stages)
        for q, p in zip(qs, probs):
            dec = [FAIL] * K
            for k, qk in zip(live, q):
                dec[k] = qk
            out.append(CellProbability(OutcomeCell(tuple(stages), tuple(dec)), float(p), total_n))
    return out


@dataclass(frozen=True)
class SampleSizeDistribution:
    expected_n: float
    distribution: tuple[tuple[int, float], ...]
    per_arm: tuple[tuple[tuple[int, float], ...], ...]
    control: tuple[tuple[int, float], ...]
    total_probability: float

    def mean(self) -> float:
        return sum(n * p for n, p in self.distribution)


def _grouped(pairs):
    acc = defaultdict(float)
    for n, p in pairs:
        acc[n] += p
    return tuple(sorted(acc.items()))


def expected_sample_size(schedule, bounds, theta, settings: MvnSettings = ESS_SETTINGS,
                         sigma: float = 1.0) -> SampleSizeDistribution:
    """E(N | theta) together with the distribution of N and its parts."""
    cells = outcome_cells(schedule, bounds, theta, settings, sigma)
    dist = _grouped((c.total_n, c.prob) for c in cells)
    per_arm = tuple(
        _grouped((schedule.n_active[k][c.cell.stages[k] - 1], c.prob) for c in cells)
        for k in range(schedule.n_arms)
    )
    control = _grouped(
        (max(schedule.n_control[k][j - 1] for k, j in enumerate(c.cell.stages)), c.prob) for c in cells
    )
    expected = sum(n * p for n, p in dist)
    return SampleSizeDistribution(expected, dist, per_arm, control, sum(p for _, p in dist))


@dataclass(frozen=True)
class OperatingCharacteristics:
    """Operating characteristics of one design under one effect vector.

    ``fwer`` is the probability of rejecting at least one true null
    (effect <= 0) under ``theta``; it equals the design FWER at the global null.
    """

    theta: tuple[float, ...]
    fwer: float
    pairwise_power: tuple[float, ...]
    conjunctive_power: float
    disjunctive_power: float
    expected_n: float
    n_distribution: tuple[tuple[int, float], ...] = field(repr=False)
    per_arm_n_distribution: tuple = field(repr=False)
    control_n_distribution: tuple = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "theta": [None if t == -math.inf else t for t in self.theta],
            "fwer": self.fwer,
            "pairwise_power": list(self.pairwise_power),
            "conjunctive_power": self.conjunctive_power,
            "disjunctive_power": self.disjunctive_power,
            "expected_n": self.expected_n,
            "n_distribution": [list(x) for x in self.n_distribution],
        }


def operating_characteristics(schedule, bounds, theta, theta_clin: float,
                              settings: MvnSettings = BOUNDARY_SETTINGS,
                              ess_settings: MvnSettings = ESS_SETTINGS,
                              sigma: float = 1.0) -> OperatingCharacteristics:
    theta = as_theta(theta)
    ess = expected_sample_size(schedule, bounds, theta, ess_settings, sigma)
    return OperatingCharacteristics(
        theta=theta.theta,
        fwer=fwer(schedule, bounds, theta, settings, sigma),
        pairwise_power=tuple(
            pairwise_power(schedule, bounds, k, t, settings, sigma) for k, t in enumerate(theta)
        ),
        conjunctive_power=conjunctive_power(schedule, bounds, theta, theta_clin, settings, sigma),
        disjunctive_power=disjunctive_power(schedule, bounds, theta, settings, sigma),
        expected_n=ess.expected_n,
        n_distribution=ess.distribution,
        per_arm_n_distribution=ess.per_arm,
        control_n_distribution=ess.control,
    )


def expected_n_survival(schedule, bounds, theta, settings: MvnSettings = ESS_SETTINGS,
                        sigma: float = 1.0) -> float:
    """E(N | theta) from continuation probabilities only.

    N depends on the stage vector alone, so with S(j) = P(every arm gets
    past analyses 1..j_k - 1) the stage-vector probabilities follow by
    inclusion-exclusion. Needs J^K rectangles instead of (2J)^K.
    """
    theta = as_theta(theta)
    K, J = schedule.n_arms, bounds.stages
    drifts = drift_matrix(schedule, theta, sigma)
    live = [k for k in range(K) if theta[k] != -math.inf]
    surv = {}
    for sv in itertools.product(range(1, J + 1), repeat=len(live)):
        arms = [k for k, j in zip(live, sv) if j > 1]
        if not arms:
            surv[sv] = 1.0
            continue
        js = [j - 1 for k, j in zip(live, sv) if j > 1]
        a = np.concatenate([bounds.lower[k, :j] - drifts[k][:j] for k, j in zip(arms, js)])
        b = np.concatenate([bounds.upper[k, :j] - drifts[k][:j] for k, j in zip(arms, js)])
        corr = _restricted(schedule, arms, js)
        surv[sv] = mvn_prob(a, b, corr, settings).prob
    total = 0.0
    for sv in surv:
        p = 0.0
        for eps in itertools.product((0, 1), repeat=len(live)):
            nxt = tuple(j + e for j, e in zip(sv, eps))
            if max(nxt, default=1) > J:
                continue
            p += (-1) ** sum(eps) * surv[nxt]
        stages = [1] * K
        for k, j in zip(live, sv):
            stages[k] = j
        total += p * schedule.cell_sample_size(stages)
    return total
