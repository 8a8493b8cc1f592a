"""Multiplier curves along k^2 and the period-doubling band (Figs. 2 and 3)."""
import argparse
import csv
import warnings

import numpy as np

from cycsync.floquet import BranchAmbiguity, StabilityParameter, floquet_mode, rd_spectrum_curve
from cycsync.models import LVParams
from cycsync.msf import ray_intervals
from cycsync.orbit import find_orbit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=2.3427)
    ap.add_argument("--k2-max", type=float, default=1.2)
    ap.add_argument("--n", type=int, default=241)
    ap.add_argument("--out", default="rd_curve.csv")
    ap.add_argument("--mode-out", default=None, help="also write the leading mode at k*^2")
    args = ap.parse_args()

    orbit = find_orbit(LVParams(args.alpha, 0.5))
    k2 = np.linspace(0, args.k2_max, args.n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BranchAmbiguity)
        curve = rd_spectrum_curve(orbit, (1, 0, 0), k2)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k2"] + [f"mu{i}_{c}" for i in (1, 2, 3) for c in ("re", "im")])
        for x, s in zip(k2, curve):
            w.writerow([x] + [v for z in s.multipliers for v in (z.real, z.imag)])
    band = ray_intervals(orbit, 0.0, r_max=args.k2_max, tol=1e-6)
    print(f"T = {orbit.period:.8f}")
    for lo, hi in band:
        print(f"unstable band k2 in ({lo:.5f}, {hi:.5f}); two-node D in ({lo / 2:.5f}, {hi / 2:.5f})")
    if args.mode_out and band:
        k_star2 = 0.5 * (band[0][0] + band[0][1])
        t, mode, base = floquet_mode(orbit, StabilityParameter.diffusive((1, 0, 0), k_star2))
        np.savetxt(args.mode_out, np.column_stack((t, mode.real, base)), delimiter=",",
                   header="t,U,V,W,u0,v0,w0", comments="")


if __name__ == "__main__":
    main()
