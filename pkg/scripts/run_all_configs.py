"""Run every bundled config and print a one-line status per run.

    python3 scripts/run_all_configs.py --output-dir out [--skip multiparticle.cfg]
"""
import argparse
import sys

from rfpi import cli


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--output-dir", default="rfpi-output")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--skip", action="append", default=[], help="config name to skip (repeatable)")
    args = ap.parse_args(argv)

    worst = 0
    for name in cli.bundled_configs():
        if name in args.skip:
            continue
        code, summary = cli.run(name, args.output_dir, args.threads, quiet=True)
        worst = max(worst, code)
        failed = [c["name"] for c in summary.get("clauses", []) if not c["passed"]]
        detail = summary.get("error", {}).get("class", "") or ", ".join(failed)
        print(f"{name:<28} exit={code} {summary.get('wall_time', 0.0):8.2f}s {detail}")
    return worst


if __name__ == "__main__":
    sys.exit(main())
