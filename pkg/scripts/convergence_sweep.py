"""Sweep the slice count for the measured oscillator and write a CSV.

The reference is Crank-Nicolson on the same grid; columns are those of
``convergence_study`` plus the measurement resolution used.

    python3 scripts/convergence_sweep.py --delta-a 0.5 1 2 --out sweep.csv
"""
import argparse

from rfpi import model as M
from rfpi.cli import write_csv
from rfpi.grid import Grid, gaussian_packet
from rfpi.oracle import HamiltonianOperator, cn_solve
from rfpi.propagator import convergence_study


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--delta-a", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--nu", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    ap.add_argument("--points", type=int, default=512)
    ap.add_argument("--half-width", type=float, default=12.0)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--cn-steps", type=int, default=2048)
    ap.add_argument("--out", default="convergence_sweep.csv")
    args = ap.parse_args(argv)

    grid = Grid(1, args.half_width, args.points)
    f = gaussian_packet(grid, 0.5, 0.3)
    p = M.harmonic()
    rows = []
    for da in args.delta_a:
        w = M.quadratic_weight(0.0, da, args.t, 1)
        ref = cn_solve(HamiltonianOperator(grid, p, w), f, args.t, args.cn_steps)
        for r in convergence_study(p, w, f, args.t, args.nu, oracle=lambda t, ref=ref: ref):
            rows.append({"delta_a": da, **r})
            print(f"delta_a={da:<5} nu={r['nu']:<5} error={r['l2_error']:.3e} order={r['order']:.2f}")
    write_csv(args.out, rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
