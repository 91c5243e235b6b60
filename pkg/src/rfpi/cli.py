"""Command line runner for bundled and user experiment configs.

    python3 -m rfpi list-scenarios
    python3 -m rfpi run free_particle.cfg --output-dir out --seed 3

Exit codes: 0 all clauses pass, 1 a clause failed, 2 config error,
3 numerical error.  Each run writes one CSV per table plus ``summary.json``
into ``<output root>/<scenario>-<config hash prefix>/``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

from .errors import ConfigError, InvalidParameter, RFPIError
from .scenarios import CATALOG, SCENARIOS, config_hash, load_config, run_scenario

OUTPUT_ENV = "RFPI_OUTPUT_ROOT"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
HASH_EXCLUDE = ("output_dir", "threads")


def bundled_configs():
    root = resources.files("rfpi") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def resolve_config(path):
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("rfpi") / "configs" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config {path} not found (bundled: {', '.join(bundled_configs())})")


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path, rows):
    cols = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols)
        for r in rows:
            wr.writerow([_fmt(r[c]) for c in cols])


def output_root(arg, cfg):
    return Path(arg or cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or "rfpi-output")


def run(config_path, output_dir=None, threads=None, seed=None, quiet=False):
    """Execute one config; returns ``(exit_code, summary dict)``."""
    start = time.perf_counter()
    summary = {"config": str(config_path), "artifacts": []}
    try:
        cfg = load_config(resolve_config(config_path))
    except ConfigError as exc:
        summary.update(exit_code=EXIT_CONFIG, error={"class": type(exc).__name__, "message": str(exc)})
        return EXIT_CONFIG, summary
    if seed is not None:
        cfg["seed"] = int(seed)
    digest = config_hash({k: v for k, v in cfg.items() if k not in HASH_EXCLUDE})
    outdir = output_root(output_dir, cfg) / f"{cfg['scenario']}-{digest[:12]}"
    summary.update(scenario=cfg["scenario"], config_hash=digest, seed=cfg.get("seed", 0),
                   tolerances={k: v for k, v in sorted(cfg.items()) if k.startswith("tol.")})
    code = EXIT_PASS
    try:
        res = run_scenario(cfg, threads)
        summary["clauses"] = [c.as_dict() for c in res.clauses]
        summary["passed"] = res.passed
        outdir.mkdir(parents=True, exist_ok=True)
        for name, rows in res.tables.items():
            path = outdir / f"{name}.csv"
            write_csv(path, rows)
            summary["artifacts"].append(str(path))
        code = EXIT_PASS if res.passed else EXIT_FAIL
    except (ConfigError, InvalidParameter) as exc:
        code = EXIT_CONFIG
        summary["error"] = {"class": type(exc).__name__, "message": str(exc)}
    except RFPIError as exc:
        code = EXIT_NUMERIC
        summary["error"] = {"class": type(exc).__name__, "message": str(exc)}
    summary["wall_time"] = time.perf_counter() - start
    summary["exit_code"] = code
    outdir.mkdir(parents=True, exist_ok=True)
    spath = outdir / "summary.json"
    summary["artifacts"].append(str(spath))
    with open(spath, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=str)
    if not quiet:
        for c in summary.get("clauses", []):
            mark = "PASS" if c["passed"] else "FAIL"
            if c["relation"] == "holds":
                stat = "" if math.isnan(c["statistic"]) else f" ({c['statistic']:.6g})"
                print(f"{mark} {c['name']}{stat}")
            else:
                print(f"{mark} {c['name']}: {c['statistic']:.6g} {c['relation']} {c['tolerance']:.6g}")
        print(f"summary: {spath}")
    return code, summary


def list_scenarios(out=None):
    out = sys.stdout if out is None else out
    for tag in SCENARIOS:
        print(f"{tag:<14} {CATALOG[tag]}", file=out)
    print("\nbundled configs: " + ", ".join(bundled_configs()), file=out)


def build_parser():
    ap = argparse.ArgumentParser(prog="rfpi", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--output-dir")
    r.add_argument("--threads", type=int)
    r.add_argument("--seed", type=int)
    sub.add_parser("list-scenarios", help="print the scenario catalog")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command in (None, "list-scenarios"):
        list_scenarios()
        return EXIT_PASS
    code, summary = run(args.config, args.output_dir, args.threads, args.seed)
    if "error" in summary:
        print(json.dumps(summary["error"]), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
