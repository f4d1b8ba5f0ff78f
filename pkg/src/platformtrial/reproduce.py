"""Regenerate the published tables and compare them with the golden files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from .boundaries import ShapeFamily, solve_boundaries
from .comparator import (
    PlatformScanner,
    crossover_scan,
    design_separate,
    pair_scenarios,
    separate_expected_n,
    table3_scenarios,
)
from .model import DesignSpec, build_schedule
from .mvn import BOUNDARY_SETTINGS, ESS_SETTINGS, MvnSettings
from .oc import operating_characteristics
from .sizing import size_proportional

__all__ = ["Check", "TABLES", "load_golden", "reproduce", "parse_theta"]


@dataclass(frozen=True)
class Check:
    name: str
    published: float
    computed: float | None
    tol: float

    @property
    def ok(self) -> bool:
        if self.computed is None:
            return False
        return abs(self.computed - self.published) <= self.tol + 1e-12

    def line(self) -> str:
        mark = "ok" if self.ok else "MISMATCH"
        comp = "none" if self.computed is None else f"{self.computed:.6g}"
        return f"{mark:8s} {self.name}: published {self.published:g}, computed {comp} (tol {self.tol:g})"


def load_golden(table: str) -> dict:
    with resources.files("platformtrial.golden").joinpath(f"{table}.json").open() as fh:
        return json.load(fh)


def parse_theta(values, theta_clin: float) -> tuple[float, ...]:
    """Effect vector from config form: numbers, "clin" for theta_clin, "-inf"."""
    out = []
    for v in values:
        if v == "clin":
            out.append(theta_clin)
        elif v in ("-inf", None):
            out.append(-math.inf)
        else:
            out.append(float(v))
    return tuple(out)


def _spec(g: dict, **over) -> DesignSpec:
    keys = ("n_arms", "stages", "alpha", "beta", "theta_clin", "boundary_shape", "power_mode",
            "adding_fractions", "adding_times")
    d = {k: g[k] for k in keys if k in g}
    d.update(over)
    for k in ("adding_fractions", "adding_times"):
        if d.get(k) is not None:
            d[k] = tuple(d[k])
    return DesignSpec(**d)


def _boundary_checks(prefix, upper, lower, pub_u, pub_l, tol):
    out = []
    for j, (c, p) in enumerate(zip(upper, pub_u), 1):
        out.append(Check(f"{prefix} u{j}", p, float(c), tol))
    for j, (c, p) in enumerate(zip(lower[:-1], pub_l[:-1]), 1):
        out.append(Check(f"{prefix} l{j}", p, float(c), tol))
    return out


def _table1(g, settings, ess_settings):
    tol = g["tolerance"]["boundary"]
    out = []
    for mode, pub in g["designs"].items():
        d = size_proportional(_spec(g, power_mode=mode), settings)
        out += _boundary_checks(mode, d.boundaries.upper[0], d.boundaries.lower[0], g["upper"], g["lower"], tol)
        out.append(Check(f"{mode} n", pub["n"], d.n, 0))
        for key in ("n_active", "n_control", "n_before"):
            comp = np.asarray(getattr(d.schedule, key), dtype=float).ravel()
            for i, (c, p) in enumerate(zip(comp, np.ravel(pub[key]))):
                out.append(Check(f"{mode} {key}[{i}]", float(p), float(c), 0))
        out.append(Check(f"{mode} max N", pub["max_n"], d.max_sample_size(), 0))
    return out


def _oc_table(g, settings, ess_settings):
    tol = g["tolerance"]
    th = g["theta_clin"]
    out = []
    first = True
    for mode, pub in g["designs"].items():
        d = size_proportional(_spec(g, power_mode=mode), settings)
        if first:
            out += _boundary_checks("boundary", d.boundaries.upper[0], d.boundaries.lower[0],
                                    g["upper"], g["lower"], tol["boundary"])
            first = False
        out.append(Check(f"{mode} n", pub["n"], d.n, 0))
        out.append(Check(f"{mode} max N", pub["max_n"], d.max_sample_size(), 0))
        for row in pub["rows"]:
            theta = parse_theta(row["theta"], th)
            oc = operating_characteristics(d.schedule, d.boundaries, theta, th, settings, ess_settings)
            label = f"{mode} theta=({','.join(map(str, row['theta']))})"
            for k in range(2):
                out.append(Check(f"{label} P_PW{k + 1}", row["pairwise_power"][k], oc.pairwise_power[k], tol["power"]))
            out.append(Check(f"{label} P_C", row["conjunctive_power"], oc.conjunctive_power, tol["power"]))
            out.append(Check(f"{label} P_D", row["disjunctive_power"], oc.disjunctive_power, tol["power"]))
            out.append(Check(f"{label} E(N)", row["expected_n"], oc.expected_n, tol["expected_n"]))
    return out


def _separate(g, settings, ess_settings):
    tol = g["tolerance"]
    th = g["theta_clin"]
    out = []
    for pub in g["designs"]:
        spec = _spec(g, power_mode=pub["power_mode"], adding_times=(0,) * g["n_arms"])
        sep = design_separate(spec, pub["setting"], settings=settings)
        label = f"setting {pub['setting']} {pub['power_mode']}"
        out += _boundary_checks(label, sep.boundaries.upper[0], sep.boundaries.lower[0],
                                pub["upper"], pub["lower"], tol["boundary"])
        for j, (c, p) in enumerate(zip(sep.stage_sizes, pub["stage_sizes"]), 1):
            out.append(Check(f"{label} n_1{j}", p, c, 0))
        for e in pub.get("expected_n", []):
            theta = parse_theta(e["theta"], th)
            out.append(Check(f"{label} E(N) theta=({','.join(map(str, e['theta']))})", e["value"],
                             separate_expected_n(sep, theta, ess_settings), tol["expected_n"]))
    return out


def _figures(g, settings, ess_settings):
    th = g["theta_clin"]
    out = []
    scanners = {}
    for panel in g["panels"]:
        mode = panel["power_mode"]
        spec = _spec(g, power_mode=mode, adding_times=(0,) * g["n_arms"])
        if mode not in scanners:
            scanners[mode] = PlatformScanner(spec, settings, ess_settings)
        scanner = scanners[mode]
        sep = design_separate(spec, panel["setting"], settings=settings)
        scen = {k: v for k, v in pair_scenarios(th).items() if k in panel["crossover_expected_n"]}
        res = crossover_scan(spec, sep, scen, settings=settings, ess_settings=ess_settings, scanner=scanner)
        label = f"{mode} setting {panel['setting']}"
        if "max_n_range" in panel:
            lo, hi = panel["max_n_range"]
            out.append(Check(f"{mode} max N at n(2)=0", lo, scanner.max_n(0), 0))
            out.append(Check(f"{mode} max N at last n(2)={res.gap_limit}", hi, scanner.max_n(res.gap_limit), 0))
        out.append(Check(f"{label} separate max N", panel["separate_max_n"], sep.max_sample_size(), 0))
        if "crossover_max_n" in panel:
            out.append(Check(f"{label} max-N crossover", panel["crossover_max_n"], res.crossover_max_n, 0))
        for name, pub in panel["crossover_expected_n"].items():
            out.append(Check(f"{label} E(N) crossover {name}", pub, res.crossover_expected_n[name], 0))
    return out


def table3_row(g: dict, row: dict, settings=BOUNDARY_SETTINGS, ess_settings=ESS_SETTINGS):
    th = g["theta_clin"]
    K = row["n_arms"]
    spec = DesignSpec(K, row["stages"], g["alpha"], g["beta"], th, g["boundary_shape"], row["power_mode"],
                      adding_times=(0,) * K)
    sep = design_separate(spec, g["setting"], alpha=g["separate_alpha"], settings=settings)
    res = crossover_scan(spec, sep, table3_scenarios(K, th), settings=settings, ess_settings=ess_settings)
    return sep, res


def _table3(g, settings, ess_settings, rows: Callable[[dict], bool] | None = None):
    out = []
    for row in g["rows"]:
        if rows is not None and not rows(row):
            continue
        sep, res = table3_row(g, row, settings, ess_settings)
        label = f"{row['power_mode']} K={row['n_arms']} J={row['stages']}"
        for j, (c, p) in enumerate(zip(sep.stage_sizes, row["stage_sizes"]), 1):
            out.append(Check(f"{label} separate n_1{j}", p, c, 0))
        out.append(Check(f"{label} separate max N", row["separate_max_n"], sep.max_sample_size(), 0))
        out.append(Check(f"{label} max-N crossover", row["crossover_max_n"], res.crossover_max_n, 0))
        for i, p in enumerate(row["crossover_expected_n"], 1):
            out.append(Check(f"{label} E(N) crossover Theta{i}", p, res.crossover_expected_n[f"theta{i}"], 0))
    return out


TABLES = {
    "table1": _table1,
    "table2": _oc_table,
    "tableS1": _oc_table,
    "tableS2": _oc_table,
    "tableS3": _oc_table,
    "separate": _separate,
    "figures": _figures,
    "table3": _table3,
}


def reproduce(table: str, settings: MvnSettings = BOUNDARY_SETTINGS,
              ess_settings: MvnSettings = ESS_SETTINGS) -> list[Check]:
    if table not in TABLES:
        raise KeyError(f"unknown table {table!r}; choose from {', '.join(TABLES)}")
    return TABLES[table](load_golden(table), settings, ess_settings)
