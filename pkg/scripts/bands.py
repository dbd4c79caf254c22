"""Band structure of the bulk FCC woodpile and its full-gap report."""

import argparse
import time

from woodpile.geometry import WoodpileSpec, primitive_cell
from woodpile.pwe import DEFAULT_PATH, KPath, SolverConfig, band_structure, gap_midgap


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--plane-waves", type=int, default=400)
    ap.add_argument("--points", type=int, default=4, help="points per path segment")
    ap.add_argument("--w-over-c", type=float, default=0.2145)
    ap.add_argument("--method", default="inverse-eps", choices=("inverse-eps", "fourier-inverse"))
    ap.add_argument("--csv", default="bands.csv")
    args = ap.parse_args()
    cell = primitive_cell(WoodpileSpec.fcc(1.0, args.w_over_c))
    t0 = time.perf_counter()
    bs = band_structure(cell, KPath.woodpile(cell, DEFAULT_PATH, args.points),
                        SolverConfig(n_pw=args.plane_waves, method=args.method))
    bs.write_csv(args.csv)
    print(gap_midgap(bs).text(), end="")
    print(f"{bs.meta['n_pw']} plane waves, {time.perf_counter() - t0:.1f} s, bands in {args.csv}")


if __name__ == "__main__":
    main()
