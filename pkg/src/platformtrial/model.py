"""Domain types for a preplanned platform design and its correlation structure.

Arms are indexed from 0. A stage vector holds, per arm, the number of
analyses that arm reached (1..J), so stage numbers start at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "BoundaryShape",
    "PowerMode",
    "DesignSpec",
    "AllocationSchedule",
    "BoundaryMatrix",
    "ScenarioTheta",
    "OutcomeCell",
    "ScheduleError",
    "build_schedule",
    "equal_schedule",
    "information",
    "drift_matrix",
    "correlation_matrix",
    "full_correlation",
]


class ScheduleError(ValueError):
    """Raised for allocation schedules that cannot be run as a platform."""


class BoundaryShape(str, Enum):
    TRIANGULAR = "triangular"
    TRIANGULAR_NONBINDING = "triangular-nonbinding"
    OBRIEN_FLEMING = "obrien-fleming"
    POCOCK = "pocock"

    @property
    def binding(self) -> bool:
        return self is not BoundaryShape.TRIANGULAR_NONBINDING


class PowerMode(str, Enum):
    PAIRWISE = "pairwise"
    CONJUNCTIVE = "conjunctive"
    DISJUNCTIVE = "disjunctive"


@dataclass(frozen=True)
class DesignSpec:
    """Everything needed to size a platform design.

    Exactly one of ``adding_times`` (control patients recruited before each
    arm joins, absolute) or ``adding_fractions`` (the same, as a multiple of
    the per-arm stage size ``n``) must be given. Effects are on the raw scale
    and divided by ``sigma`` internally.
    """

    n_arms: int
    stages: int
    alpha: float
    beta: float
    theta_clin: float
    boundary_shape: BoundaryShape = BoundaryShape.TRIANGULAR
    power_mode: PowerMode = PowerMode.PAIRWISE
    sigma: float = 1.0
    adding_times: tuple[int, ...] | None = None
    adding_fractions: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "boundary_shape", BoundaryShape(self.boundary_shape))
        object.__setattr__(self, "power_mode", PowerMode(self.power_mode))
        if self.n_arms < 1 or self.stages < 1:
            raise ValueError("need at least one arm and one stage")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not self.theta_clin > 0.0:
            raise ValueError("theta_clin must be positive")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if (self.adding_times is None) == (self.adding_fractions is None):
            if self.adding_times is None and self.n_arms == 1:
                object.__setattr__(self, "adding_times", (0,))
            else:
                raise ValueError("give exactly one of adding_times or adding_fractions")
        times = self.adding_times if self.adding_times is not None else self.adding_fractions
        times = tuple(times)
        if len(times) != self.n_arms:
            raise ValueError("one adding time per arm is required")
        if times[0] != 0:
            raise ValueError("the first arm must start the trial (adding time 0)")
        if any(t1 < t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("adding times must be nondecreasing")
        if self.adding_times is not None:
            object.__setattr__(self, "adding_times", tuple(int(t) for t in times))
        else:
            object.__setattr__(self, "adding_fractions", tuple(float(t) for t in times))

    @property
    def theta_std(self) -> float:
        return self.theta_clin / self.sigma

    @property
    def proportional(self) -> bool:
        return self.adding_fractions is not None


def _half_up(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class AllocationSchedule:
    """Cumulative patient counts for every arm and analysis.

    ``n_active[k][j]`` patients on arm k and ``n_control[k][j]`` control
    patients (counted from trial start) at arm k's analysis j+1;
    ``n_before[k]`` control patients recruited before arm k joined.
    """

    n_active: tuple[tuple[int, ...], ...]
    n_control: tuple[tuple[int, ...], ...]
    n_before: tuple[int, ...]
    n: int = field(default=0)

    def __post_init__(self):
        na = tuple(tuple(int(x) for x in row) for row in self.n_active)
        nc = tuple(tuple(int(x) for x in row) for row in self.n_control)
        nb = tuple(int(x) for x in self.n_before)
        object.__setattr__(self, "n_active", na)
        object.__setattr__(self, "n_control", nc)
        object.__setattr__(self, "n_before", nb)
        if not (len(na) == len(nc) == len(nb)) or not na:
            raise ScheduleError("schedule rows disagree on the number of arms")
        for k, (a, c) in enumerate(zip(na, nc)):
            if len(a) != len(c) or not a:
                raise ScheduleError(f"arm {k}: active and control rows differ in length")
            if a[0] < 1 or any(y <= x for x, y in zip(a, a[1:])):
                raise ScheduleError(f"arm {k}: active counts must be positive and increasing")
            if any(y <= x for x, y in zip(c, c[1:])):
                raise ScheduleError(f"arm {k}: control counts must be increasing")
            if c[0] <= nb[k]:
                raise ScheduleError(f"arm {k}: no concurrent controls at first analysis")
        if self.n == 0:
            object.__setattr__(self, "n", na[0][0])

    @property
    def n_arms(self) -> int:
        return len(self.n_active)

    @property
    def stages(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.n_active)

    @property
    def r_active(self):
        return tuple(tuple(Fraction(x, self.n) for x in row) for row in self.n_active)

    @property
    def r_control(self):
        return tuple(tuple(Fraction(x, self.n) for x in row) for row in self.n_control)

    @property
    def r_before(self):
        return tuple(Fraction(x, self.n) for x in self.n_before)

    def concurrent_controls(self, k: int, stage: int) -> int:
        return self.n_control[k][stage - 1] - self.n_before[k]

    def max_sample_size(self) -> int:
        return sum(row[-1] for row in self.n_active) + max(row[-1] for row in self.n_control)

    def cell_sample_size(self, stages: Sequence[int]) -> int:
        """Total patients when arm k stops at its analysis ``stages[k]``."""
        act = sum(self.n_active[k][j - 1] for k, j in enumerate(stages))
        ctrl = max(self.n_control[k][j - 1] for k, j in enumerate(stages))
        return act + ctrl

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_active": [list(r) for r in self.n_active],
            "n_control": [list(r) for r in self.n_control],
            "n_before": list(self.n_before),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AllocationSchedule":
        return cls(d["n_active"], d["n_control"], d["n_before"], d.get("n", 0))


def build_schedule(spec: DesignSpec, n: int, stages: int | None = None) -> AllocationSchedule:
    """Equal-allocation schedule with ``n`` patients per arm per stage."""
    if n < 1:
        raise ValueError("n must be at least 1")
    J = spec.stages if stages is None else stages
    if spec.adding_fractions is not None:
        before = tuple(_half_up(f * n) for f in spec.adding_fractions)
    else:
        before = spec.adding_times
    return equal_schedule(spec.n_arms, J, n, before)


def equal_schedule(n_arms: int, stages: int, n: int, before: Sequence[int]) -> AllocationSchedule:
    before = tuple(int(b) for b in before)
    if len(before) != n_arms:
        raise ValueError("one adding time per arm is required")
    for k in range(1, n_arms):
        last_control = max(before[i] + stages * n for i in range(k))
        if before[k] > last_control:
            raise ScheduleError(
                f"arm {k} would join after control recruitment for earlier arms ended "
                f"({before[k]} > {last_control})"
            )
    active = tuple(tuple(j * n for j in range(1, stages + 1)) for _ in range(n_arms))
    control = tuple(tuple(b + j * n for j in range(1, stages + 1)) for b in before)
    return AllocationSchedule(active, control, before, n)


def information(schedule: AllocationSchedule, sigma: float, k: int, stage: int) -> float:
    """sigma^2 (1/n_kj + 1/(n_0kj - n(k))): the variance of the mean difference."""
    na = schedule.n_active[k][stage - 1]
    nc = schedule.concurrent_controls(k, stage)
    return sigma * sigma * (1.0 / na + 1.0 / nc)


def drift_matrix(schedule: AllocationSchedule, theta: Sequence[float], sigma: float = 1.0) -> list[np.ndarray]:
    """Per-arm vectors of the mean of Z_kj, theta_k / sqrt(I_kj)."""
    if len(theta) != schedule.n_arms:
        raise ValueError(f"expected {schedule.n_arms} effects, got {len(theta)}")
    out = []
    for k, t in enumerate(theta):
        J = schedule.stages[k]
        info = np.array([information(schedule, sigma, k, j) for j in range(1, J + 1)])
        if t == -math.inf:
            out.append(np.full(J, -math.inf))
        else:
            out.append(t / np.sqrt(info))
    return out


def _covariance(schedule: AllocationSchedule, k, j, k2, j2) -> float:
    # stages are 1-based; covariance of the two mean differences
    if k == k2:
        act = 1.0 / schedule.n_active[k][max(j, j2) - 1]
    else:
        act = 0.0
    s1, e1 = schedule.n_before[k], schedule.n_control[k][j - 1]
    s2, e2 = schedule.n_before[k2], schedule.n_control[k2][j2 - 1]
    overlap = max(0, min(e1, e2) - max(s1, s2))
    return act + overlap / ((e1 - s1) * (e2 - s2))


def correlation_matrix(schedule: AllocationSchedule, stage_vector: Sequence[int]) -> np.ndarray:
    """Correlation of (Z_11..Z_1j1, Z_21..Z_2j2, ...) for the given stage vector.

    Cross-arm entries come only from shared concurrent controls and are zero
    for arms whose control windows do not overlap.
    """
    if len(stage_vector) != schedule.n_arms:
        raise ValueError("stage vector length must equal the number of arms")
    idx = []
    for k, jk in enumerate(stage_vector):
        if not 1 <= jk <= schedule.stages[k]:
            raise ValueError(f"stage {jk} out of range for arm {k}")
        idx.extend((k, j) for j in range(1, jk + 1))
    return _corr_from_index(schedule, idx)


def full_correlation(schedule: AllocationSchedule) -> np.ndarray:
    return correlation_matrix(schedule, schedule.stages)


def _corr_from_index(schedule, idx):
    d = len(idx)
    cov = np.empty((d, d))
    for a, (k, j) in enumerate(idx):
        for b in range(a, d):
            k2, j2 = idx[b]
            cov[a, b] = cov[b, a] = _covariance(schedule, k, j, k2, j2)
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    if d > 1 and np.linalg.eigvalsh(corr)[0] < -1e-10:
        raise ScheduleError("correlation matrix is not positive semidefinite")
    return corr


@dataclass(frozen=True, eq=False)
class BoundaryMatrix:
    """Per-arm upper and lower critical values (arms x stages)."""

    upper: np.ndarray
    lower: np.ndarray
    binding_futility: bool = True

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.upper, dtype=float))
        lo = np.atleast_2d(np.asarray(self.lower, dtype=float))
        if u.shape != lo.shape:
            raise ValueError("upper and lower boundaries differ in shape")
        if np.any(lo > u + 1e-12):
            raise ValueError("lower boundary exceeds upper boundary")
        if not np.allclose(lo[:, -1], u[:, -1]):
            raise ValueError("final analysis must force a decision (l_J = u_J)")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(lo))):
            raise ValueError("boundaries must be finite")
        u.setflags(write=False)
        lo.setflags(write=False)
        object.__setattr__(self, "upper", u)
        object.__setattr__(self, "lower", lo)

    @property
    def n_arms(self) -> int:
        return self.upper.shape[0]

    @property
    def stages(self) -> int:
        return self.upper.shape[1]

    def for_type_one_error(self) -> "BoundaryMatrix":
        """Boundaries used when computing the FWER (interim futility dropped if non-binding)."""
        if self.binding_futility:
            return self
        lo = self.lower.copy()
        lo[:, :-1] = -np.inf
        return _UncheckedBoundaries(self.upper, lo, True)

    @classmethod
    def repeat(cls, upper, lower, n_arms: int, binding: bool = True) -> "BoundaryMatrix":
        return cls(np.tile(np.asarray(upper, float), (n_arms, 1)), np.tile(np.asarray(lower, float), (n_arms, 1)), binding)

    def to_dict(self) -> dict:
        return {
            "upper": self.upper.tolist(),
            "lower": self.lower.tolist(),
            "binding_futility": self.binding_futility,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundaryMatrix":
        return cls(np.array(d["upper"]), np.array(d["lower"]), bool(d.get("binding_futility", True)))


class _UncheckedBoundaries(BoundaryMatrix):
    # interim lower limits of -inf, only ever used inside the FWER evaluation
    def __post_init__(self):
        object.__setattr__(self, "upper", np.asarray(self.upper, float))
        object.__setattr__(self, "lower", np.asarray(self.lower, float))


@dataclass(frozen=True)
class ScenarioTheta:
    """True standardized effects, one per arm; -inf means certain early futility."""

    theta: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in self.theta)
        if any(math.isnan(x) or x == math.inf for x in t):
            raise ValueError("effects must be finite or -inf")
        object.__setattr__(self, "theta", t)

    def __len__(self):
        return len(self.theta)

    def __iter__(self):
        return iter(self.theta)

    def __getitem__(self, k):
        return self.theta[k]


def as_theta(theta) -> ScenarioTheta:
    return theta if isinstance(theta, ScenarioTheta) else ScenarioTheta(tuple(theta))


@dataclass(frozen=True)
class OutcomeCell:
    """Exit analysis per arm (1-based) and decision (0 futility, 1 superiority)."""

    stages: tuple[int, ...]
    decisions: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(int(s) for s in self.stages))
        object.__setattr__(self, "decisions", tuple(int(q) for q in self.decisions))
        if len(self.stages) != len(self.decisions):
            raise ValueError("stage and decision vectors differ in length")
        if any(s < 1 for s in self.stages) or any(q not in (0, 1) for q in self.decisions):
            raise ValueError("invalid outcome cell")
