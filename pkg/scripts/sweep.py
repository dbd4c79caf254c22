"""Gap-midgap ratio of the FCC woodpile against rod width w/c."""

import argparse
import os

import numpy as np

from woodpile.geometry import WoodpileSpec
from woodpile.pwe import SolverConfig, sweep_rod_width, write_sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--start", type=float, default=0.15)
    ap.add_argument("--stop", type=float, default=0.30)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--plane-waves", type=int, default=340)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--csv", default="sweep.csv")
    args = ap.parse_args()
    values = np.round(np.arange(args.start, args.stop + 0.5 * args.step, args.step), 6)
    rows = sweep_rod_width(WoodpileSpec.fcc(1.0), values, SolverConfig(n_pw=args.plane_waves),
                           workers=args.workers)
    write_sweep_csv(args.csv, rows)
    best = max(rows, key=lambda r: r[1].ratio)
    for v, r in rows:
        print(f"w/c = {v:.3f}  ratio = {r.ratio:.4f}{'  <- max' if v == best[0] else ''}")


if __name__ == "__main__":
    main()
