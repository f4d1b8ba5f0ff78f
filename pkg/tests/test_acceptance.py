"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed to
the terminal even when output capture is on.
"""

import itertools
import math
import time

import numpy as np
import pytest

from platformtrial import DesignSpec, solve_boundaries
from platformtrial.comparator import (
    PlatformScanner,
    crossover_scan,
    design_separate,
    pair_scenarios,
)
from platformtrial.model import correlation_matrix, equal_schedule
from platformtrial.oc import (
    conjunctive_power,
    disjunctive_power,
    fwer_global_null,
    operating_characteristics,
    outcome_cells,
    pairwise_power,
)
from platformtrial.boundaries import ShapeFamily, shape
from platformtrial.reproduce import reproduce
from platformtrial.simulate import SimConfig, correlation_check, simulate
from platformtrial.sizing import size_design, size_proportional

TH = -math.log(0.69)
NINF = -math.inf

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, failures, elapsed, note=""):
        status = "PASS" if not failures else "FAIL"
        line = f"criterion {number}: {status} ({elapsed:.1f}s)"
        if note:
            line += f" {note}"
        with capsys.disabled():
            print(f"\n{line}")
            for f in failures:
                print(f"    - {f}")
        assert not failures, "; ".join(failures)
    return emit


def flair(mode="pairwise", shape_="triangular"):
    return DesignSpec(2, 2, 0.025, 0.2, TH, shape_, mode, adding_fractions=(0, 1))


def close(failures, label, got, want, tol):
    if abs(got - want) > tol + 1e-12:
        failures.append(f"{label}: computed {got:.4f}, published {want} (tol {tol})")


def equal(failures, label, got, want):
    if got != want:
        failures.append(f"{label}: computed {got}, published {want}")


def test_criterion_1_boundaries(report):
    t = time.perf_counter()
    b = solve_boundaries(equal_schedule(2, 2, 76, (0, 76)), "triangular", 0.025)
    fails = []
    for label, got, want in [("u1", b.upper[0, 0], 2.501), ("u2", b.upper[0, 1], 2.358),
                             ("l1", b.lower[0, 0], 0.834), ("l2", b.lower[0, 1], 2.358)]:
        close(fails, label, got, want, 0.002)
    elapsed = time.perf_counter() - t
    if elapsed >= 30:
        fails.append(f"runtime {elapsed:.1f}s >= 30s")
    report(1, fails, elapsed)


def test_criterion_2_sizing(report):
    t = time.perf_counter()
    fails = []
    pw = size_proportional(flair())
    cj = size_proportional(flair("conjunctive"))
    equal(fails, "pairwise n", pw.n, 76)
    equal(fails, "pairwise max N", pw.max_sample_size(), 532)
    equal(fails, "conjunctive n", cj.n, 96)
    equal(fails, "conjunctive max N", cj.max_sample_size(), 672)
    single = size_design(DesignSpec(1, 1, 0.025, 0.2, TH))
    equal(fails, f"K=1 J=1 n (power {single.power:.5f})", single.n, 114)
    elapsed = time.perf_counter() - t
    if elapsed >= 120:
        fails.append(f"runtime {elapsed:.1f}s >= 120s")
    report(2, fails, elapsed)


def test_criterion_3_table2(report):
    t = time.perf_counter()
    checks = reproduce("table2")
    cells = [c for c in checks if "theta=" in c.name]
    fails = [c.line() for c in checks if not c.ok]
    elapsed = time.perf_counter() - t
    n_power = sum("E(N)" not in c.name for c in cells)
    n_en = sum("E(N)" in c.name for c in cells)
    if elapsed >= 300:
        fails.append(f"runtime {elapsed:.1f}s >= 300s")
    report(3, fails, elapsed, f"[{n_power} power cells, {n_en} E(N) cells]")


def test_criterion_4_supplementary_families(report):
    t = time.perf_counter()
    fails = []
    published = {
        "obrien-fleming": ([3.166, 2.239], None, 70, 87),
        "pocock": ([2.440, 2.440], None, 76, 95),
        "triangular-nonbinding": ([2.517, 2.373], 0.839, 77, 97),
    }
    for family, (upper, l1, n_pw, n_cj) in published.items():
        pw = size_proportional(flair("pairwise", family))
        cj = size_proportional(flair("conjunctive", family))
        for j, want in enumerate(upper):
            close(fails, f"{family} u{j + 1}", pw.boundaries.upper[0, j], want, 0.002)
        if l1 is not None:
            close(fails, f"{family} l1", pw.boundaries.lower[0, 0], l1, 0.002)
        equal(fails, f"{family} pairwise n", pw.n, n_pw)
        equal(fails, f"{family} conjunctive n", cj.n, n_cj)
    report(4, fails, time.perf_counter() - t)


def test_criterion_5_separate_trials(report):
    t = time.perf_counter()
    fails = [c.line() for c in reproduce("separate") if not c.ok]
    report(5, fails, time.perf_counter() - t)


def test_criterion_6_crossover_scans(report):
    t = time.perf_counter()
    fails = []
    for mode, cross_max, cross_en, extremes in [("pairwise", 64, 15, (456, 616)),
                                                ("conjunctive", 104, 39, (558, 784))]:
        spec = DesignSpec(2, 2, 0.025, 0.2, TH, power_mode=mode, adding_times=(0, 0))
        scanner = PlatformScanner(spec)
        sep = design_separate(spec, 2)
        res = crossover_scan(spec, sep, {"ninf_clin": (NINF, TH)}, scanner=scanner)
        equal(fails, f"{mode} max-N crossover", res.crossover_max_n, cross_max)
        equal(fails, f"{mode} E(N) crossover", res.crossover_expected_n["ninf_clin"], cross_en)
        equal(fails, f"{mode} max N at gap 0", scanner.max_n(0), extremes[0])
        equal(fails, f"{mode} max N at last gap", scanner.max_n(res.gap_limit), extremes[1])
    t3 = time.perf_counter()
    checks = reproduce("table3")
    t3 = time.perf_counter() - t3
    flagged = [c.line() for c in checks if not c.ok]
    fails += [f"unreproducible Table 3 cell, {line}" for line in flagged]
    if t3 >= 1800:
        fails.append(f"Table 3 runtime {t3:.0f}s >= 1800s")
    report(6, fails, time.perf_counter() - t,
           f"[Table 3: {len(checks) - len(flagged)}/{len(checks)} cells exact in {t3:.0f}s]")


def test_criterion_7_properties(report):
    t = time.perf_counter()
    fails = []
    eps = 2e-5
    rng = np.random.default_rng(7)

    cj = size_proportional(flair("conjunctive"))
    base = conjunctive_power(cj.schedule, cj.boundaries, (TH, TH), TH)
    worse = [th for th in rng.uniform(TH, 3 * TH, size=(50, 2))
             if conjunctive_power(cj.schedule, cj.boundaries, th, TH) < base - eps]
    if worse:
        fails.append(f"conjunctive power below its value at theta' for {len(worse)} of 50 effect vectors")

    s3 = equal_schedule(3, 3, 40, (0, 30, 60))
    b3 = solve_boundaries(s3, "triangular", 0.025)
    for theta in [(0.0, 0.0, 0.0), (TH, 0.0, NINF), (0.2, 0.5, TH)]:
        total = sum(c.prob for c in outcome_cells(s3, b3, theta))
        if abs(total - 1) > 1e-4:
            fails.append(f"outcome cells sum to {total:.6f} at {theta}")

    pw = size_proportional(flair())
    grid = np.linspace(-0.3, 0.9, 9)
    for arm, other in itertools.product((0, 1), (NINF, 0.0, TH)):
        def theta(x):
            v = [other, other]
            v[arm] = x
            return tuple(v)
        series = {
            "pairwise": [pairwise_power(pw.schedule, pw.boundaries, arm, x) for x in grid],
            "disjunctive": [disjunctive_power(pw.schedule, pw.boundaries, theta(x)) for x in grid],
            "conjunctive": [conjunctive_power(pw.schedule, pw.boundaries, theta(x), TH) for x in grid[grid >= TH]],
        }
        for name, vals in series.items():
            if any(y < x - eps for x, y in zip(vals, vals[1:])):
                fails.append(f"{name} power not monotone in arm {arm + 1} (other effect {other})")

    s2 = equal_schedule(3, 2, 60, (0, 30, 60))
    b2 = solve_boundaries(s2, "triangular", 0.025)
    for theta in itertools.product([NINF, 0.0, 0.15, TH, 0.6], repeat=3):
        p = [pairwise_power(s2, b2, k, x) for k, x in enumerate(theta)]
        c = conjunctive_power(s2, b2, theta, TH)
        d = disjunctive_power(s2, b2, theta)
        rel = [p[k] for k, x in enumerate(theta) if x >= TH]
        if (rel and (c > min(rel) + eps or min(rel) > max(p) + eps)) or max(p) > d + eps:
            fails.append(f"power ordering violated at {theta}")

    fam = ShapeFamily("triangular", 2)
    vals = [fwer_global_null(pw.schedule, shape(fam, a, 2)) for a in np.linspace(1.0, 2.6, 12)]
    if not all(x > y for x, y in zip(vals, vals[1:])):
        fails.append("FWER not strictly decreasing in the boundary scale")

    for theta in itertools.product([NINF, -0.2, 0.0, TH, 0.8], repeat=2):
        sim = simulate(SimConfig(pw.schedule, pw.boundaries, theta, replicates=100_000, seed=20240601))
        if sim.fwer.value > 0.025 + 3 * sim.fwer.se:
            fails.append(f"simulated FWER {sim.fwer.value:.4f} above 0.025 + 3 SE at {theta}")
    report(7, fails, time.perf_counter() - t)


def test_criterion_8_oracle_agreement(report):
    t = time.perf_counter()
    fails = []
    d = size_proportional(flair())
    for theta in [(0.0, 0.0), (TH, TH), (TH, NINF)]:
        oc = operating_characteristics(d.schedule, d.boundaries, theta, TH)
        sim = simulate(SimConfig(d.schedule, d.boundaries, theta, replicates=1_000_000,
                                 seed=20240601, theta_clin=TH))
        pairs = [("FWER", oc.fwer, sim.fwer.value, sim.fwer.se),
                 ("conjunctive", oc.conjunctive_power, sim.conjunctive_power.value, sim.conjunctive_power.se),
                 ("disjunctive", oc.disjunctive_power, sim.disjunctive_power.value, sim.disjunctive_power.se),
                 ("E(N)", oc.expected_n, sim.expected_n, sim.expected_n_se)]
        pairs += [(f"pairwise {k + 1}", oc.pairwise_power[k], r.value, r.se)
                  for k, r in enumerate(sim.pairwise_power)]
        for name, exact, emp, se in pairs:
            if abs(exact - emp) > 3 * se + 1e-9:
                fails.append(f"{name} at {theta}: analytic {exact:.5f}, simulated {emp:.5f} (SE {se:.5f})")
    emp = correlation_check(d.schedule, replicates=1_000_000, seed=20240601)
    dev = float(np.max(np.abs(emp - correlation_matrix(d.schedule, (2, 2)))))
    if dev > 0.005:
        fails.append(f"largest correlation deviation {dev:.4f} > 0.005")
    report(8, fails, time.perf_counter() - t, f"[max correlation deviation {dev:.4f}]")
