"""Receiver aperture over long-term beam diameter against distance, one column per Cn2."""

import argparse
import csv

import numpy as np

from fsoqkd.turbulence import BeamGeometry, TurbulenceParams, aperture_ratio, boundary_distance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="aperture_ratio_vs_distance.csv")
    ap.add_argument("--aperture", type=float, default=0.08, help="receiver aperture diameter [m]")
    ap.add_argument("--w0", type=float, default=0.020, help="transmit waist radius [m]")
    ap.add_argument("--cn2", type=float, nargs="+", default=[1e-15, 1e-14, 1e-13])
    ap.add_argument("--max-distance", type=float, default=5000.0)
    args = ap.parse_args()

    beam = BeamGeometry(w0=args.w0)
    d = np.linspace(50.0, args.max_distance, 200)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["distance_m"] + [f"cn2={c!r}" for c in args.cn2])
        for L in d:
            w.writerow([repr(float(L))] + [
                repr(aperture_ratio(TurbulenceParams(c), beam, L, args.aperture)) for c in args.cn2
            ])
    for c in args.cn2:
        b = boundary_distance(TurbulenceParams(c), beam, args.aperture)
        print(f"cn2={c:g}: ratio falls below 1 at {float(b):.0f} m")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
