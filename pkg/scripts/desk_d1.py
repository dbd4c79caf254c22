"""Desk-scale D1 cavity study: ringdowns at 13/17/21 layers and a mode snapshot.

Runs are cached, so a second invocation only refits.  Takes about an hour
on one core at the default 16 cells per a.
"""

import argparse
import json
import time

from woodpile.cavity import DESK_CONFIG, DESK_LAYERS, desk_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cache", default=".cache/desk", help="run cache directory")
    ap.add_argument("--layers", type=int, nargs="+", default=list(DESK_LAYERS))
    ap.add_argument("--out", default=None, help="write the summary JSON here")
    args = ap.parse_args()
    t0 = time.perf_counter()
    res = desk_study(args.cache, tuple(args.layers), DESK_CONFIG)
    for nl, row in res["layers"].items():
        print(f"N_l={nl:3d}  c/lambda={row['c_over_lambda']:.4f}  Q={row['Q']:.0f}  "
              f"grid={row['grid_shape']}  wall={row['wall_time_s']:.0f}s")
        if "mode_volume" in row:
            mv = row["mode_volume"]
            print(f"         V_eff={mv['V_eff_um3']:.3e} um^3  V_n={mv['V_n']:.3f}  "
                  f"argmax in defect: {mv['argmax_in_defect']}")
    print(f"total {time.perf_counter() - t0:.0f} s")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(res, fh, indent=1, default=str)


if __name__ == "__main__":
    main()
