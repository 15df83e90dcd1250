"""Command-line front end: ``til verify``, ``til sweep``, ``til constants``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .battery import REGISTRY, BatteryResult, expand, run_battery
from .config import FORMATS, load_config, validate_battery
from .errors import ConfigError, TilError

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
CSV_COLUMNS = ["statement_id", "instance", "lhs", "rhs", "margin", "tolerance", "passed", "empirical_constant"]
SWEEP_COLUMNS = ["parameter", "value", "statement_id", "instance", "margin", "empirical_constant", "passed"]
SWEEP_PARAMETERS = ("eps", "c", "v", "sigma", "resolution")
CONSTANT_IDS = ("thm2", "bh", "trace", "spectral")


def _instance_tag(inputs: dict) -> str:
    keys = [k for k in ("potential", "instance", "g", "f") if inputs.get(k) is not None]
    return ";".join(f"{k}={inputs[k]}" for k in keys)


def manifest(cfg, result: BatteryResult) -> dict:
    reports = [r.to_dict() for r in result.reports]
    return {
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "battery": expand(cfg.battery),
        "reports": reports,
        "errors": result.errors,
        "summary": {"n_reports": len(reports), "n_passed": sum(r["passed"] for r in reports),
                    "n_failed": sum(not r["passed"] for r in reports), "n_errors": len(result.errors)},
    }


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def markdown_table(result: BatteryResult) -> str:
    lines = ["| statement | instance | margin | tolerance | pass |", "|---|---|---|---|---|"]
    for r in result.reports:
        lines.append(f"| {r.statement_id} | {_instance_tag(r.inputs)} | {_fmt(r.margin)} | {_fmt(r.tolerance)} | "
                     f"{'PASS' if r.passed else 'FAIL'} |")
    for sid, err in result.errors.items():
        lines.append(f"| {sid} | error | | | ERROR: {err} |")
    return "\n".join(lines) + "\n"


def reports_csv(result: BatteryResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.reports:
        w.writerow([r.statement_id, _instance_tag(r.inputs), repr(r.lhs), repr(r.rhs), repr(r.margin),
                    repr(r.tolerance), int(r.passed),
                    "" if r.empirical_constant is None else repr(r.empirical_constant)])
    return buf.getvalue()


def write_outputs(cfg, result: BatteryResult, out: str, fmt: str) -> list:
    base = Path(out)
    if base.suffix.lower() in (".json", ".csv", ".md"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        p = base.with_suffix(".json")
        p.write_text(json.dumps(manifest(cfg, result), indent=2, sort_keys=True) + "\n")
        written.append(p)
    if fmt == "csv":
        p = base.with_suffix(".csv")
        p.write_text(reports_csv(result))
        written.append(p)
    p = base.with_suffix(".md")
    p.write_text(markdown_table(result))
    written.append(p)
    return written


def exit_code(result: BatteryResult) -> int:
    if result.errors:
        return EXIT_ERROR
    return EXIT_PASS if result.all_passed else EXIT_FAIL


def _load(args):
    path = args.config or args.config_pos
    if path is None:
        raise ConfigError("no config given (use --config PATH)")
    cfg = load_config(path, REGISTRY)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.battery is not None:
        ids = [b.strip() for b in args.battery.split(",") if b.strip()]
        validate_battery(ids, REGISTRY)
        cfg = cfg.replace(battery=ids)
    if args.out is not None:
        cfg = cfg.replace(output_path=args.out)
    if args.format is not None:
        cfg = cfg.replace(output_format=args.format)
    return cfg


def cmd_verify(args) -> int:
    cfg = _load(args)
    if not expand(cfg.battery):
        raise ConfigError("empty battery")
    result = run_battery(cfg)
    for p in write_outputs(cfg, result, cfg.output_path, cfg.output_format):
        print(f"wrote {p}", file=sys.stderr)
    n_fail = sum(not r.passed for r in result.reports)
    print(f"{len(result.reports)} reports, {n_fail} failed, {len(result.errors)} errors")
    for sid, err in result.errors.items():
        print(f"error in {sid}: {err}", file=sys.stderr)
    return exit_code(result)


def _sweep_config(cfg, parameter, value):
    params = dict(cfg.params)
    if parameter == "eps":
        params["eps_list"] = [value]
        return cfg.replace(params=params)
    if parameter == "c":
        return cfg.replace(c_scan=[value])
    if parameter == "v":
        params["v_list"] = [value]
        return cfg.replace(params=params)
    if parameter == "sigma":
        params["sigma"] = value
        return cfg.replace(params=params)
    if parameter == "resolution":
        pots = [{k: v for k, v in p.items() if k != "resolution"} for p in cfg.potentials]
        return cfg.replace(resolution=int(value), potentials=pots)
    raise ConfigError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")


def cmd_sweep(args) -> int:
    if args.parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {args.parameter!r}; choose from {SWEEP_PARAMETERS}")
    cfg = _load(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("no sweep values")
    rows, codes = [], []
    base = Path(cfg.output_path)
    for v in values:
        c = _sweep_config(cfg, args.parameter, v)
        result = run_battery(c)
        write_outputs(c, result, str(base.parent / f"{base.name}_{args.parameter}_{v:g}"), c.output_format)
        codes.append(exit_code(result))
        for r in result.reports:
            rows.append([args.parameter, repr(v), r.statement_id, _instance_tag(r.inputs), repr(r.margin),
                         "" if r.empirical_constant is None else repr(r.empirical_constant), int(r.passed)])
    base.parent.mkdir(parents=True, exist_ok=True)
    out = base.parent / f"{base.name}_sweep_{args.parameter}.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    print(f"wrote {out}", file=sys.stderr)
    return max(codes)


def aggregate_constants(result: BatteryResult) -> list:
    def pick(sid):
        return [r for r in result.reports if r.statement_id == sid]

    rows = []
    thm2 = [r.empirical_constant for r in pick("thm2") if r.empirical_constant is not None]
    rows.append({"constant": "thm2_c", "value": min(thm2) if thm2 else math.nan, "extremum": "min", "n": len(thm2)})
    bh = [r.empirical_constant for r in pick("bh") if r.empirical_constant is not None]
    rows.append({"constant": "bh_c", "value": max(bh) if bh else math.nan, "extremum": "max", "n": len(bh)})
    tr = [r.empirical_constant for r in pick("trace") if r.empirical_constant is not None]
    rows.append({"constant": "trace_ratio", "value": min(tr) if tr else math.nan, "extremum": "min", "n": len(tr)})
    sp = pick("spectral")
    if sp:
        lo = min(r.details["observed_bracket"][0] for r in sp)
        hi = max(r.details["observed_bracket"][1] for r in sp)
        rows.append({"constant": "lambda_over_h2", "value": math.sqrt(lo * hi), "lower": lo, "upper": hi,
                     "extremum": "bracket", "n": sum(r.inputs["n_measures"] for r in sp)})
    else:
        rows.append({"constant": "lambda_over_h2", "value": math.nan, "extremum": "bracket", "n": 0})
    return rows


def cmd_constants(args) -> int:
    cfg = _load(args)
    ids = expand(cfg.battery)
    if not ids:
        raise ConfigError("empty battery")
    ids += [c for c in CONSTANT_IDS if c not in ids]
    cfg = cfg.replace(battery=ids)
    result = run_battery(cfg)
    rows = aggregate_constants(result)
    base = Path(cfg.output_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    (base.parent / f"{base.name}_constants.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    lines = ["| constant | value | extremum | n |", "|---|---|---|---|"]
    for r in rows:
        val = _fmt(r["value"]) if "lower" not in r else f"{_fmt(r['value'])} [{_fmt(r['lower'])}, {_fmt(r['upper'])}]"
        lines.append(f"| {r['constant']} | {val} | {r['extremum']} | {r['n']} |")
    table = "\n".join(lines) + "\n"
    (base.parent / f"{base.name}_constants.md").write_text(table)
    print(table, end="")
    if result.errors:
        for sid, err in result.errors.items():
            print(f"error in {sid}: {err}", file=sys.stderr)
        return EXIT_ERROR
    if not all(math.isfinite(r["value"]) and r["value"] > 0 for r in rows):
        return EXIT_FAIL
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="til", description="Numerical verification of transport-entropy inequalities.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config_pos", nargs="?", metavar="CONFIG", help="config file (TOML or JSON)")
        sp.add_argument("--config", help="config file (TOML or JSON)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--battery", help="comma-separated statement ids")
        sp.add_argument("--out", help="output path prefix")
        sp.add_argument("--format", choices=FORMATS, help="report format")

    common(sub.add_parser("verify", help="run a battery and write a manifest"))
    sw = sub.add_parser("sweep", help="re-run a battery over parameter values")
    common(sw)
    sw.add_argument("--parameter", required=True, help=f"one of {', '.join(SWEEP_PARAMETERS)}")
    sw.add_argument("--values", required=True, help="comma-separated values")
    common(sub.add_parser("constants", help="aggregate empirical constants over a battery"))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_PASS
    handler = {"verify": cmd_verify, "sweep": cmd_sweep, "constants": cmd_constants}[args.command]
    try:
        return handler(args)
    except (TilError, OSError, ValueError) as exc:
        print(f"til: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
