"""Beam-wander interruption fraction against distance, one column per Cn2."""

import argparse
import csv

import numpy as np

from fsoqkd.turbulence import BeamGeometry, TurbulenceParams, interruption_fraction


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="interruption_vs_distance.csv")
    ap.add_argument("--capture-radius", type=float, default=0.04, help="[m]")
    ap.add_argument("--cn2", type=float, nargs="+", default=[0.0, 1e-15, 1e-14, 1e-13])
    ap.add_argument("--start", type=float, default=500.0)
    ap.add_argument("--stop", type=float, default=5000.0)
    ap.add_argument("--num", type=int, default=46)
    args = ap.parse_args()

    beam = BeamGeometry()
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["distance_m"] + [f"cn2={c!r}" for c in args.cn2])
        for L in np.linspace(args.start, args.stop, args.num):
            w.writerow([repr(float(L))] + [
                repr(interruption_fraction(TurbulenceParams(c), beam, L, args.capture_radius))
                for c in args.cn2
            ])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
