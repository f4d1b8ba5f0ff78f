"""Separate-trial benchmarks and scans over the gap between arm entries."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

from .model import BoundaryShape, DesignSpec, PowerMode, ScheduleError
from .mvn import BOUNDARY_SETTINGS, ESS_SETTINGS, MvnSettings
from .oc import expected_n_survival
from .sizing import SizedDesign, size_fixed_adding, size_proportional

__all__ = [
    "SeparateTrialsDesign",
    "ScanPoint",
    "ScanResult",
    "PlatformScanner",
    "design_separate",
    "separate_expected_n",
    "separate_alpha",
    "crossover_scan",
    "table3_scenarios",
    "pair_scenarios",
]

log = logging.getLogger(__name__)


def separate_alpha(alpha: float, n_trials: int, setting: int) -> float:
    """Per-trial type I error: Setting 1 splits alpha across trials, Setting 2 does not."""
    if setting == 1:
        return -math.expm1(math.log1p(-alpha) / n_trials)
    if setting == 2:
        return alpha
    raise ValueError("setting must be 1 or 2")


@dataclass(frozen=True, eq=False)
class SeparateTrialsDesign:
    n_trials: int
    trial: SizedDesign
    alpha: float
    power: float

    @property
    def boundaries(self):
        return self.trial.boundaries

    @property
    def stage_sizes(self) -> tuple[int, ...]:
        return self.trial.schedule.n_active[0]

    def max_sample_size(self) -> int:
        return self.n_trials * self.trial.max_sample_size()

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "alpha": self.alpha,
            "power": self.power,
            "stage_sizes": list(self.stage_sizes),
            "upper": self.boundaries.upper[0].tolist(),
            "lower": self.boundaries.lower[0].tolist(),
            "max_sample_size": self.max_sample_size(),
        }


def design_separate(spec: DesignSpec, setting: int = 2, alpha: float | None = None,
                    settings: MvnSettings = BOUNDARY_SETTINGS) -> SeparateTrialsDesign:
    """K identical two-arm trials benchmarking the platform ``spec``.

    ``alpha`` overrides the error rate the setting is applied to (defaults to
    the platform's). Conjunctive mode asks each trial for power (1-beta)^(1/K)
    so all K succeed with probability 1-beta; disjunctive asks for
    1 - beta^(1/K).
    """
    K = spec.n_arms
    base = spec.alpha if alpha is None else alpha
    a1 = separate_alpha(base, K, setting)
    if spec.power_mode is PowerMode.CONJUNCTIVE:
        power = (1.0 - spec.beta) ** (1.0 / K)
    elif spec.power_mode is PowerMode.DISJUNCTIVE:
        power = 1.0 - spec.beta ** (1.0 / K)
    else:
        power = 1.0 - spec.beta
    single = DesignSpec(
        n_arms=1, stages=spec.stages, alpha=a1, beta=1.0 - power, theta_clin=spec.theta_clin,
        boundary_shape=spec.boundary_shape, power_mode=PowerMode.PAIRWISE, sigma=spec.sigma,
        adding_fractions=(0.0,),
    )
    return SeparateTrialsDesign(K, size_proportional(single, settings), a1, power)


def _single_expected_n(design: SeparateTrialsDesign, theta: float, settings) -> float:
    t = design.trial
    return expected_n_survival(t.schedule, t.boundaries, (theta,), settings, t.spec.sigma)


def separate_expected_n(design: SeparateTrialsDesign, theta: Sequence[float],
                        settings: MvnSettings = ESS_SETTINGS) -> float:
    """Sum of the independent trials' expected sizes; each control stops with its arm."""
    if len(theta) != design.n_trials:
        raise ValueError("one effect per trial is required")
    return sum(_single_expected_n(design, t, settings) for t in theta)


def table3_scenarios(n_arms: int, theta_clin: float) -> dict[str, tuple[float, ...]]:
    K, th = n_arms, theta_clin
    return {
        "theta1": (th,) * K,
        "theta2": (th,) + (0.0,) * (K - 1),
        "theta3": (0.0,) * (K - 1) + (th,),
        "theta4": (0.0,) * K,
    }


def pair_scenarios(theta_clin: float) -> dict[str, tuple[float, float]]:
    th, ninf = theta_clin, -math.inf
    return {
        "clin_clin": (th, th),
        "clin_null": (th, 0.0),
        "clin_ninf": (th, ninf),
        "null_clin": (0.0, th),
        "null_null": (0.0, 0.0),
        "ninf_clin": (ninf, th),
    }


@dataclass(frozen=True)
class ScanPoint:
    gap: int
    n: int
    max_n: int
    expected_n: Mapping[str, float]


@dataclass
class ScanResult:
    separate: SeparateTrialsDesign
    separate_expected_n: dict[str, float]
    points: list[ScanPoint]
    crossover_max_n: int | None
    crossover_expected_n: dict[str, int | None]
    gap_limit: int
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for p in sorted(self.points, key=lambda p: p.gap):
            row = {"gap": p.gap, "n": p.n, "platform_max_n": p.max_n,
                   "separate_max_n": self.separate.max_sample_size()}
            for name, v in p.expected_n.items():
                row[f"platform_en_{name}"] = v
                row[f"separate_en_{name}"] = self.separate_expected_n[name]
            row["max_n_crossed"] = int(self.separate.max_sample_size() <= p.max_n)
            for name, v in p.expected_n.items():
                if v is not None:
                    row[f"en_crossed_{name}"] = int(self.separate_expected_n[name] <= v)
            out.append(row)
        return out


class PlatformScanner:
    """Sizes platform designs with equal gaps between arm entries, caching by gap.

    Later entry weakens the correlation between arms, which raises the
    boundaries and so lowers power at a given n; the stage size is therefore
    nondecreasing in the gap. The +1 search at a new gap starts from the
    stage size of the nearest smaller gap already sized.
    """

    def __init__(self, spec: DesignSpec, settings: MvnSettings = BOUNDARY_SETTINGS,
                 ess_settings: MvnSettings = ESS_SETTINGS):
        if spec.adding_times is None and spec.adding_fractions is None:
            raise ValueError("spec needs adding times")
        self.spec = replace(spec, adding_times=(0,) * spec.n_arms, adding_fractions=None)
        self.settings = settings
        self.ess_settings = ess_settings
        self._designs: dict[int, SizedDesign] = {}
        self._en: dict[tuple[int, tuple], float] = {}
        concurrent = replace(self.spec, adding_times=None, adding_fractions=(0.0,) * spec.n_arms)
        self.concurrent = size_proportional(concurrent, settings)

    def gap_spec(self, gap: int) -> DesignSpec:
        return replace(self.spec, adding_times=tuple(k * gap for k in range(self.spec.n_arms)))

    def design(self, gap: int) -> SizedDesign:
        if gap not in self._designs:
            below = [g for g in self._designs if g < gap]
            if below:
                prev = self._designs[max(below)]
                start, guess = prev.n, prev.scale
            else:
                start, guess = self.concurrent.n, self.concurrent.scale
            self._designs[gap] = size_fixed_adding(self.gap_spec(gap), self.settings,
                                                   start=start, guess=guess)
        return self._designs[gap]

    def max_n(self, gap: int) -> int:
        return self.design(gap).max_sample_size()

    def expected_n(self, gap: int, theta: Sequence[float]) -> float:
        key = (gap, tuple(theta))
        if key not in self._en:
            d = self.design(gap)
            self._en[key] = expected_n_survival(d.schedule, d.boundaries, theta,
                                                self.ess_settings, d.spec.sigma)
        return self._en[key]

    def gap_limit(self) -> int:
        """Largest gap for which each arm joins before earlier controls finish."""
        J = self.spec.stages
        g = J * self.concurrent.n
        while True:
            g_next = J * self.design(g).n
            if g_next == g:
                return g
            g = g_next

    def points(self) -> list[ScanPoint]:
        return [ScanPoint(g, d.n, d.max_sample_size(),
                          {str(k[1]): v for k, v in self._en.items() if k[0] == g})
                for g, d in sorted(self._designs.items())]


def _smallest_true(pred: Callable[[int], bool], lo: int, hi: int) -> int | None:
    """Smallest g in [lo, hi] with pred(g), assuming pred is monotone."""
    if not pred(hi):
        return None
    if pred(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def crossover_scan(spec: DesignSpec, separate: SeparateTrialsDesign,
                   scenarios: Mapping[str, Sequence[float]],
                   grid: Sequence[int] | None = None,
                   settings: MvnSettings = BOUNDARY_SETTINGS,
                   ess_settings: MvnSettings = ESS_SETTINGS,
                   scanner: PlatformScanner | None = None) -> ScanResult:
    """Where separate trials stop being worse than the platform.

    Arm k joins after (k-1)*gap control patients. A crossover is the smallest
    gap with separate <= platform. Without ``grid`` the crossovers are found
    by bisection over every integer gap up to the last feasible one; with a
    grid every point is evaluated and crossovers are read off the grid.
    """
    scanner = scanner or PlatformScanner(spec, settings, ess_settings)
    sep_max = separate.max_sample_size()
    sep_en = {name: separate_expected_n(separate, th, ess_settings) for name, th in scenarios.items()}
    limit = scanner.gap_limit()
    notes = []

    if grid is not None:
        gaps = sorted(g for g in set(grid) if 0 <= g <= limit)
        if len(gaps) < len(set(grid)):
            notes.append(f"grid points above the feasible gap {limit} were skipped")
        for g in gaps:
            for th in scenarios.values():
                scanner.expected_n(g, th)
        cross_max = next((g for g in gaps if sep_max <= scanner.max_n(g)), None)
        cross_en = {
            name: next((g for g in gaps if sep_en[name] <= scanner.expected_n(g, th)), None)
            for name, th in scenarios.items()
        }
    else:
        cross_max = _smallest_true(lambda g: sep_max <= scanner.max_n(g), 0, limit)
        cross_en = {
            name: _smallest_true(lambda g, th=th, s=sep_en[name]: s <= scanner.expected_n(g, th), 0, limit)
            for name, th in scenarios.items()
        }
    points = [
        ScanPoint(g, scanner.design(g).n, scanner.max_n(g),
                  {name: scanner._en.get((g, tuple(th))) for name, th in scenarios.items()})
        for g in sorted(scanner._designs)
    ]
    return ScanResult(separate, sep_en, points, cross_max, cross_en, limit, notes)
