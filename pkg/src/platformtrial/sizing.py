"""Smallest per-arm stage size reaching the target power."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .boundaries import ShapeFamily, scale_of, solve_boundaries
from .model import (
    AllocationSchedule,
    BoundaryMatrix,
    DesignSpec,
    PowerMode,
    ScheduleError,
    build_schedule,
    equal_schedule,
)
from .mvn import BOUNDARY_SETTINGS, MvnSettings
from .oc import conjunctive_power, disjunctive_power, pairwise_power

__all__ = [
    "SizedDesign",
    "SizingError",
    "design_power",
    "size_proportional",
    "size_fixed_adding",
    "size_design",
    "max_sample_size",
]

log = logging.getLogger(__name__)

N_CAP = 10**6


class SizingError(RuntimeError):
    """The power target was not reached within the iteration cap."""


@dataclass(frozen=True, eq=False)
class SizedDesign:
    spec: DesignSpec
    n: int
    schedule: AllocationSchedule
    boundaries: BoundaryMatrix
    power: float

    @property
    def family(self) -> ShapeFamily:
        return ShapeFamily(self.spec.boundary_shape, self.spec.stages)

    @property
    def scale(self) -> float:
        return scale_of(self.boundaries, self.family)

    def max_sample_size(self) -> int:
        return self.schedule.max_sample_size()

    def to_dict(self) -> dict:
        s = self.spec
        return {
            "spec": {
                "n_arms": s.n_arms,
                "stages": s.stages,
                "alpha": s.alpha,
                "beta": s.beta,
                "theta_clin": s.theta_clin,
                "sigma": s.sigma,
                "boundary_shape": s.boundary_shape.value,
                "power_mode": s.power_mode.value,
                "adding_times": None if s.adding_times is None else list(s.adding_times),
                "adding_fractions": None if s.adding_fractions is None else list(s.adding_fractions),
            },
            "n": self.n,
            "schedule": self.schedule.to_dict(),
            "boundaries": self.boundaries.to_dict(),
            "power": self.power,
            "max_sample_size": self.max_sample_size(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SizedDesign":
        spec_d = dict(d["spec"])
        for key in ("adding_times", "adding_fractions"):
            if spec_d.get(key) is not None:
                spec_d[key] = tuple(spec_d[key])
        return cls(
            DesignSpec(**spec_d),
            int(d["n"]),
            AllocationSchedule.from_dict(d["schedule"]),
            BoundaryMatrix.from_dict(d["boundaries"]),
            float(d["power"]),
        )


def design_power(spec: DesignSpec, schedule: AllocationSchedule, bounds: BoundaryMatrix,
                 settings: MvnSettings = BOUNDARY_SETTINGS) -> float:
    """The power the spec asks for, at theta_clin for every arm."""
    theta = spec.theta_std
    K = schedule.n_arms
    if spec.power_mode is PowerMode.PAIRWISE:
        stages = bounds.stages
        # arms with identical boundaries and within-arm schedule share one value
        seen = {}
        out = 1.0
        for k in range(K):
            key = (tuple(bounds.upper[k]), tuple(bounds.lower[k]), schedule.n_active[k],
                   tuple(c - schedule.n_before[k] for c in schedule.n_control[k][:stages]))
            if key not in seen:
                seen[key] = pairwise_power(schedule, bounds, k, theta, settings)
            out = min(out, seen[key])
        return out
    if spec.power_mode is PowerMode.CONJUNCTIVE:
        return conjunctive_power(schedule, bounds, (theta,) * K, theta, settings)
    return disjunctive_power(schedule, bounds, (theta,) * K, settings)


def _reference_schedule(spec: DesignSpec) -> AllocationSchedule:
    # integer n for which every adding fraction is exact, so only ratios matter
    fracs = [Fraction(f).limit_denominator(10_000) for f in spec.adding_fractions]
    n_ref = math.lcm(*(f.denominator for f in fracs))
    before = [int(f * n_ref) for f in fracs]
    return equal_schedule(spec.n_arms, spec.stages, n_ref, before)


def _minimal_n(power_at, target, start: int = 1) -> tuple[int, float]:
    """Smallest n >= start with power_at(n) >= target, power nondecreasing in n."""
    cache = {}

    def p(n):
        if n not in cache:
            cache[n] = power_at(n)
        return cache[n]

    lo, hi = start - 1, start
    while p(hi) < target:
        lo, hi = hi, hi * 2
        if hi > N_CAP:
            raise SizingError("power target not reached below the sample-size cap")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if p(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi, p(hi)


def size_proportional(spec: DesignSpec, settings: MvnSettings = BOUNDARY_SETTINGS) -> SizedDesign:
    """Size a design whose adding times scale with n (fixed ratios).

    Boundaries depend only on the ratios, so they are solved once.
    """
    if spec.adding_fractions is None:
        raise ValueError("size_proportional needs adding_fractions")
    family = ShapeFamily(spec.boundary_shape, spec.stages)
    bounds = solve_boundaries(_reference_schedule(spec), family, spec.alpha, settings)
    target = 1.0 - spec.beta

    def power_at(n):
        return design_power(spec, build_schedule(spec, n), bounds, settings)

    n, power = _minimal_n(power_at, target)
    return SizedDesign(spec, n, build_schedule(spec, n), bounds, power)


def size_fixed_adding(spec: DesignSpec, settings: MvnSettings = BOUNDARY_SETTINGS,
                      max_iter: int = 10_000, start: int | None = None,
                      guess: float | None = None) -> SizedDesign:
    """Iterative sizing for adding times fixed in patients.

    Start from the design with every arm present from the outset, then for
    n, n+1, ... re-solve the boundaries for the true adding times and stop at
    the first n whose power reaches the target. ``start`` and ``guess``
    replace the initial stage size and boundary scale when a caller already
    knows a stage size that is too small or just right. An n whose schedule
    would let an arm join after earlier controls finished counts as too small.
    """
    if spec.adding_times is None:
        raise ValueError("size_fixed_adding needs adding_times")
    if start is None:
        concurrent = replace(spec, adding_times=None, adding_fractions=(0.0,) * spec.n_arms)
        first = size_proportional(concurrent, settings)
        start, guess = first.n, first.scale
    family = ShapeFamily(spec.boundary_shape, spec.stages)
    target = 1.0 - spec.beta
    n = start
    for _ in range(max_iter):
        try:
            schedule = build_schedule(spec, n)
        except ScheduleError:
            n += 1
            continue
        bounds = solve_boundaries(schedule, family, spec.alpha, settings, guess=guess)
        guess = scale_of(bounds, family)
        power = design_power(spec, schedule, bounds, settings)
        log.debug("n=%d scale=%.6f power=%.6f", n, guess, power)
        if power >= target:
            return SizedDesign(spec, n, schedule, bounds, power)
        n += 1
    raise SizingError(f"power target not reached after {max_iter} increments")


def size_design(spec: DesignSpec, settings: MvnSettings = BOUNDARY_SETTINGS) -> SizedDesign:
    if spec.adding_fractions is not None:
        return size_proportional(spec, settings)
    return size_fixed_adding(spec, settings)


def max_sample_size(schedule: AllocationSchedule) -> int:
    """sum_k n_{k,J} + max_k n_{0,k,J}."""
    return schedule.max_sample_size()
