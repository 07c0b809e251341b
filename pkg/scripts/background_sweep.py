"""QBER and secret key rate of the default link as sky background rises."""

import argparse
import csv
import dataclasses

import numpy as np

from fsoqkd.sim import Scenario, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="background_sweep.csv")
    ap.add_argument("--max-radiance", type=float, default=1.0, help="W m^-2 sr^-1 nm^-1")
    ap.add_argument("--points", type=int, default=10)
    ap.add_argument("--slots", type=int, default=2_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    s = dataclasses.replace(Scenario(), n_slots=args.slots, master_seed=args.seed)
    values = np.linspace(0.0, args.max_radiance, args.points)
    rows = sweep(s, "background.sky_radiance", values, workers=args.workers)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sky_radiance", "background_rate_hz", "qber", "secret_key_rate_bps", "abort"])
        for r in rows:
            st = r.result.stats
            w.writerow([repr(float(r.value)), repr(st.background_rate_hz), repr(st.qber),
                        repr(st.secret_key_rate_bps), str(st.abort).lower()])
            print(f"radiance {r.value:7.4f}  QBER {st.qber:.4f}  SKR {st.secret_key_rate_bps / 1e6:7.3f} Mbps"
                  f"{'  abort' if st.abort else ''}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
