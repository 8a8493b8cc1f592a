"""Instability intervals along rays Om = -R exp(i theta) and the critical angle (Fig. 8)."""
import argparse
import math

from cycsync.models import LVParams
from cycsync.msf import ray_intervals
from cycsync.orbit import find_orbit


def n_intervals(orbit, theta):
    return len(ray_intervals(orbit, theta, resolution=300))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=2.3427)
    ap.add_argument("--theta80", type=float, nargs="+", default=[33, 37],
                    help="angles in units of pi/80")
    ap.add_argument("--critical", action="store_true",
                    help="bisect for the angle where a second interval appears")
    args = ap.parse_args()
    orbit = find_orbit(LVParams(args.alpha, 0.5))
    for k in args.theta80:
        ivs = ray_intervals(orbit, k * math.pi / 80)
        print(f"theta={k:g}pi/80: " + " U ".join(f"({a:.4f}, {b:.4f})" for a, b in ivs))
    if args.critical:
        lo, hi = 28.0, 37.0  # one interval at lo, two at hi
        while hi - lo > 0.05:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if n_intervals(orbit, mid * math.pi / 80) < 2 else (lo, mid)
        print(f"second interval appears between theta={lo:.2f}pi/80 and {hi:.2f}pi/80")


if __name__ == "__main__":
    main()
