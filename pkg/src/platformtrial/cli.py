"""Command-line entry point: design, oc, scan, simulate, reproduce."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace

from .comparator import crossover_scan, design_separate, pair_scenarios, table3_scenarios
from .model import DesignSpec
from .mvn import BOUNDARY_SETTINGS, ESS_SETTINGS
from .oc import operating_characteristics
from .reproduce import TABLES, parse_theta, reproduce
from .simulate import SimConfig, simulate
from .sizing import SizedDesign, size_design

log = logging.getLogger("platformtrial")

REQUIRED = ("n_arms", "stages", "alpha", "beta", "theta_clin")


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def spec_from_config(cfg: dict) -> DesignSpec:
    # no defaults for error rates or effect size
    missing = [k for k in REQUIRED if k not in cfg]
    if missing:
        raise ConfigError(f"config is missing {', '.join(missing)}")
    if "boundary_shape" not in cfg or "power_mode" not in cfg:
        raise ConfigError("config must name boundary_shape and power_mode")
    kw = {k: cfg[k] for k in REQUIRED + ("boundary_shape", "power_mode", "sigma") if k in cfg}
    for key in ("adding_times", "adding_fractions"):
        if cfg.get(key) is not None:
            kw[key] = tuple(cfg[key])
    try:
        return DesignSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _design_from_config(cfg: dict, settings) -> SizedDesign:
    if "design" in cfg:
        return SizedDesign.from_dict(cfg["design"])
    return size_design(spec_from_config(cfg), settings)


def _fmt_vec(v, digits=3):
    return "(" + ", ".join(f"{x:.{digits}f}" for x in v) + ")"


def _design_text(d: SizedDesign) -> str:
    s = d.schedule
    lines = [
        f"boundary shape   {d.spec.boundary_shape.value}, power {d.spec.power_mode.value}",
        f"U                {_fmt_vec(d.boundaries.upper[0])}",
        f"L                {_fmt_vec(d.boundaries.lower[0])}",
        f"n per stage      {d.n}",
        f"power            {d.power:.3f}",
    ]
    for k in range(s.n_arms):
        lines.append(f"arm {k + 1}: n(k)={s.n_before[k]:<5d} active {list(s.n_active[k])}  control {list(s.n_control[k])}")
    lines.append(f"max N            {d.max_sample_size()}")
    return "\n".join(lines)


def _scenarios(cfg: dict, spec: DesignSpec):
    th = spec.theta_std
    raw = cfg.get("scenarios")
    if raw is None:
        if spec.n_arms == 2:
            return pair_scenarios(th)
        return table3_scenarios(spec.n_arms, th)
    if raw == "table3":
        return table3_scenarios(spec.n_arms, th)
    if isinstance(raw, dict):
        return {name: parse_theta(v, th) for name, v in raw.items()}
    return {",".join(map(str, v)): parse_theta(v, th) for v in raw}


def _emit(args, text: str, payload, rows=None):
    if args.format == "json":
        out = json.dumps(payload, indent=2, default=_json_default)
    elif args.format == "csv":
        if rows is None:
            raise ConfigError("csv output is only available for tabular commands")
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()) if rows else [])
        writer.writeheader()
        writer.writerows(rows)
        out = buf.getvalue()
    else:
        out = text
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out if out.endswith("\n") else out + "\n")
    else:
        print(out)


def _json_default(x):
    if isinstance(x, float) and math.isinf(x):
        return "-inf" if x < 0 else "inf"
    if hasattr(x, "tolist"):
        return x.tolist()
    raise TypeError(type(x))


def _clean(v):
    if isinstance(v, float) and math.isinf(v):
        return "-inf" if v < 0 else "inf"
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


def cmd_design(args, settings, ess_settings):
    cfg = load_config(args.config)
    d = _design_from_config(cfg, settings)
    _emit(args, _design_text(d), d.to_dict())
    return 0


def cmd_oc(args, settings, ess_settings):
    cfg = load_config(args.config)
    d = _design_from_config(cfg, settings)
    th = d.spec.theta_std
    rows, records = [], []
    header = f"{'theta':>22s} " + " ".join(f"P_PW{k + 1:<3d}" for k in range(d.spec.n_arms)) + \
        "  P_C    P_D    FWER   E(N)"
    lines = [_design_text(d), "", header]
    for name, theta in _scenarios(cfg, d.spec).items():
        oc = operating_characteristics(d.schedule, d.boundaries, theta, th, settings, ess_settings, d.spec.sigma)
        pw = " ".join(f"{p:.3f} " for p in oc.pairwise_power)
        lines.append(f"{name:>22s} {pw} {oc.conjunctive_power:.3f}  {oc.disjunctive_power:.3f}  "
                     f"{oc.fwer:.3f}  {oc.expected_n:.1f}")
        rec = _clean(oc.to_dict())
        rec["name"] = name
        records.append(rec)
        row = {"scenario": name}
        for k, p in enumerate(oc.pairwise_power, 1):
            row[f"pairwise_power_{k}"] = p
        row.update(conjunctive_power=oc.conjunctive_power, disjunctive_power=oc.disjunctive_power,
                   fwer=oc.fwer, expected_n=oc.expected_n, max_n=d.max_sample_size())
        rows.append(row)
    _emit(args, "\n".join(lines), {"design": d.to_dict(), "scenarios": records}, rows)
    return 0


def cmd_scan(args, settings, ess_settings):
    cfg = load_config(args.config)
    spec = spec_from_config({**cfg, "adding_times": [0] * cfg.get("n_arms", 1), "adding_fractions": None})
    scan = cfg.get("scan", {})
    setting = scan.get("setting", 2)
    sep = design_separate(spec, setting, alpha=scan.get("separate_alpha"), settings=settings)
    grid = scan.get("grid")
    if isinstance(grid, dict):
        grid = range(grid.get("start", 0), grid["stop"] + 1, grid.get("step", 1))
    scenarios = _scenarios(cfg, spec)
    res = crossover_scan(spec, sep, scenarios, grid=grid, settings=settings, ess_settings=ess_settings)
    rows = res.rows()
    lines = [
        f"separate trials: setting {setting}, alpha {sep.alpha:.5f}, stage sizes {list(sep.stage_sizes)}, "
        f"max N {sep.max_sample_size()}",
        f"last feasible n(2): {res.gap_limit}",
        f"max-N crossover: n(2) >= {res.crossover_max_n}",
    ]
    for name, g in res.crossover_expected_n.items():
        lines.append(f"E(N) crossover {name}: n(2) >= {g}  (separate E(N) {res.separate_expected_n[name]:.1f})")
    lines += res.notes
    payload = {
        "separate": sep.to_dict(),
        "separate_expected_n": res.separate_expected_n,
        "gap_limit": res.gap_limit,
        "crossover_max_n": res.crossover_max_n,
        "crossover_expected_n": res.crossover_expected_n,
        "points": rows,
    }
    _emit(args, "\n".join(lines), payload, rows)
    return 0


def cmd_simulate(args, settings, ess_settings):
    cfg = load_config(args.config)
    d = _design_from_config(cfg, settings)
    th = d.spec.theta_std
    sim = cfg.get("simulate", {})
    reps = int(sim.get("replicates", 100_000))
    lines = [_design_text(d), ""]
    records = []
    for name, theta in _scenarios(cfg, d.spec).items():
        conf = SimConfig(d.schedule, d.boundaries, theta, reps, args.seed, th, d.spec.sigma,
                         bool(sim.get("patient_level", False)), args.threads)
        r = simulate(conf)
        oc = operating_characteristics(d.schedule, d.boundaries, theta, th, settings, ess_settings, d.spec.sigma)
        lines.append(f"scenario {name} ({reps} replicates)")
        pairs = [("FWER", r.fwer.value, r.fwer.se, oc.fwer)]
        for k, rate in enumerate(r.pairwise_power):
            pairs.append((f"P_PW{k + 1}", rate.value, rate.se, oc.pairwise_power[k]))
        pairs += [("P_C", r.conjunctive_power.value, r.conjunctive_power.se, oc.conjunctive_power),
                  ("P_D", r.disjunctive_power.value, r.disjunctive_power.se, oc.disjunctive_power),
                  ("E(N)", r.expected_n, r.expected_n_se, oc.expected_n)]
        for label, emp, se, ana in pairs:
            z = (emp - ana) / se if se > 0 else 0.0
            lines.append(f"  {label:6s} simulated {emp:10.4f} (se {se:.4f})  analytic {ana:10.4f}  z {z:+.2f}")
        records.append({"name": name, "simulated": r.to_dict(), "analytic": _clean(oc.to_dict())})
    _emit(args, "\n".join(lines), {"seed": args.seed, "scenarios": records})
    return 0


def cmd_reproduce(args, settings, ess_settings):
    checks = reproduce(args.table, settings, ess_settings)
    bad = [c for c in checks if not c.ok]
    lines = [c.line() for c in checks]
    lines.append(f"{len(checks) - len(bad)}/{len(checks)} cells within tolerance")
    payload = {"table": args.table, "checks": [
        {"name": c.name, "published": c.published, "computed": c.computed, "tol": c.tol, "ok": c.ok}
        for c in checks]}
    rows = [{"name": c.name, "published": c.published, "computed": c.computed, "tol": c.tol, "ok": int(c.ok)}
            for c in checks]
    _emit(args, "\n".join(lines), payload, rows)
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=20240601, help="seed for integration and simulation")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--mvn-error", type=float, default=None,
                        help="absolute error target for rectangle probabilities")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("text", "json", "csv"), default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="platformtrial", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("design", "size a design and print its boundaries"),
                           ("oc", "operating characteristics over scenarios"),
                           ("scan", "platform versus separate trials over adding times"),
                           ("simulate", "Monte Carlo check against the analytic values")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--config", required=True)
    rp = sub.add_parser("reproduce", parents=[common], help="regenerate a published table and diff it")
    rp.add_argument("table", choices=sorted(TABLES))
    return p


COMMANDS = {"design": cmd_design, "oc": cmd_oc, "scan": cmd_scan, "simulate": cmd_simulate,
            "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    settings = replace(BOUNDARY_SETTINGS, seed=args.seed)
    ess_settings = replace(ESS_SETTINGS, seed=args.seed)
    if args.mvn_error is not None:
        settings = settings.with_error(args.mvn_error)
        ess_settings = ess_settings.with_error(args.mvn_error)
    try:
        return COMMANDS[args.command](args, settings, ess_settings)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
