"""Single-parameter boundary families and the FWER-matching solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri

from .model import AllocationSchedule, BoundaryMatrix, BoundaryShape
from .mvn import BOUNDARY_SETTINGS, MvnSettings
from .oc import fwer_global_null

__all__ = ["ShapeFamily", "BracketError", "shape", "shape_vectors", "solve_boundaries", "solve_scale"]


class BracketError(RuntimeError):
    """The FWER could not be bracketed around its target."""


@dataclass(frozen=True)
class ShapeFamily:
    family: BoundaryShape
    stages: int

    def __post_init__(self):
        object.__setattr__(self, "family", BoundaryShape(self.family))
        if self.stages < 1:
            raise ValueError("stages must be at least 1")


def shape_vectors(family: BoundaryShape, stages: int, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Upper and lower critical values for one arm.

    Triangular: u_j = a (1 + j/J) / sqrt(j), l_j = -a (1 - 3 j/J) / sqrt(j).
    O'Brien-Fleming: u_j = a sqrt(J/j). Pocock: u_j = a. Both with futility
    at 0 before the final analysis.
    """
    if not a > 0:
        raise ValueError("boundary scale must be positive")
    family = BoundaryShape(family)
    J = stages
    j = np.arange(1, J + 1, dtype=float)
    t = j / J
    if family in (BoundaryShape.TRIANGULAR, BoundaryShape.TRIANGULAR_NONBINDING):
        upper = a * (1 + t) / np.sqrt(j)
        lower = -a * (1 - 3 * t) / np.sqrt(j)
    elif family is BoundaryShape.OBRIEN_FLEMING:
        upper = a * np.sqrt(J / j)
        lower = np.zeros(J)
    else:
        upper = np.full(J, float(a))
        lower = np.zeros(J)
    lower[-1] = upper[-1]
    return upper, lower


def shape(family: ShapeFamily, a: float, n_arms: int = 1) -> BoundaryMatrix:
    upper, lower = shape_vectors(family.family, family.stages, a)
    return BoundaryMatrix.repeat(upper, lower, n_arms, family.family.binding)


def solve_scale(schedule: AllocationSchedule, family: ShapeFamily, alpha: float,
                settings: MvnSettings = BOUNDARY_SETTINGS, guess: float | None = None,
                xtol: float = 1e-6) -> float:
    """Scale a* with FWER(shape(a*)) = alpha under the global null."""
    if not 0.0 < alpha < 0.5:
        raise ValueError("FWER target must lie in (0, 0.5)")
    K = schedule.n_arms
    if K == 1 and family.stages == 1:
        # single test: u = z_{1-alpha}
        z = -float(ndtri(alpha))
        u, _ = shape_vectors(family.family, 1, 1.0)
        return z / float(u[0])

    def objective(a):
        return fwer_global_null(schedule, shape(family, a, K), settings) - alpha

    if guess is not None:
        lo, hi = _bracket(objective, guess)
    else:
        lo, hi = _bonferroni_bracket(schedule, family, alpha, settings)
    return brentq(objective, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=60)


def _bonferroni_bracket(schedule, family, alpha, settings):
    """Bracket from single-arm solves.

    FWER(a) >= P(arm k rejects) for each k, and FWER(a) <= sum over k, so
    the largest single-arm scale at alpha lies below the root and the
    largest at alpha/K lies above it.
    """
    K = schedule.n_arms
    if K == 1:
        return _expanding_bracket(
            lambda a: fwer_global_null(schedule, shape(family, a, 1), settings) - alpha)
    arms = {}
    for k in range(K):
        key = (schedule.n_active[k], tuple(c - schedule.n_before[k] for c in schedule.n_control[k]))
        arms.setdefault(key, k)
    lo = hi = 0.0
    for k in arms.values():
        single = AllocationSchedule((schedule.n_active[k],), (schedule.n_control[k],), (schedule.n_before[k],))
        lo = max(lo, solve_scale(single, family, alpha, settings))
        hi = max(hi, solve_scale(single, family, alpha / K, settings))
    return lo * (1 - 1e-4), hi * (1 + 1e-4)


def _expanding_bracket(objective):
    lo, hi = 0.5, 6.0
    f_lo, f_hi = objective(lo), objective(hi)
    for _ in range(20):
        if f_lo >= 0 >= f_hi:
            return lo, hi
        if f_lo < 0:
            lo /= 2
            f_lo = objective(lo)
        else:
            hi *= 1.5
            f_hi = objective(hi)
    raise BracketError("could not bracket the FWER target")


def _bracket(objective, guess):
    # objective is decreasing in a; the sign at the guess gives the direction
    step = 0.004 * guess
    f0 = objective(guess)
    if f0 == 0:
        return guess, guess
    direction = 1.0 if f0 > 0 else -1.0
    for _ in range(40):
        other = max(guess + direction * step, guess / 2)
        f1 = objective(other)
        if (f1 <= 0) if direction > 0 else (f1 >= 0):
            return min(guess, other), max(guess, other)
        guess, f0 = other, f1
        step *= 2
    raise BracketError("could not bracket the FWER target")


def solve_boundaries(schedule: AllocationSchedule, family: ShapeFamily | BoundaryShape, alpha: float,
                     settings: MvnSettings = BOUNDARY_SETTINGS, guess: float | None = None) -> BoundaryMatrix:
    """Common boundaries for every arm giving FWER alpha under the global null."""
    if not isinstance(family, ShapeFamily):
        family = ShapeFamily(family, schedule.stages[0])
    a = solve_scale(schedule, family, alpha, settings, guess)
    return shape(family, a, schedule.n_arms)


def scale_of(bounds: BoundaryMatrix, family: ShapeFamily) -> float:
    """Recover the scale parameter from a boundary matrix of the family."""
    unit, _ = shape_vectors(family.family, family.stages, 1.0)
    return float(bounds.upper[0, -1] / unit[-1])
