"""Bisect alpha for the onset of the period-doubling band and print the history."""
import argparse
import time

from cycsync.floquet import critical_alpha


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lo", type=float, default=2.30)
    ap.add_argument("--hi", type=float, default=2.36)
    ap.add_argument("--gamma", type=float, default=0.5)
    args = ap.parse_args()
    t0 = time.perf_counter()
    res = critical_alpha((args.lo, args.hi), gamma=args.gamma)
    print("alpha      max|mu|   k2")
    for a, m, k2 in res.history:
        print(f"{a:.6f}  {m:.6f}  {k2:.5f}")
    print(f"alpha* = {res.alpha:.5f}  k* = {res.k:.4f}  mu = {res.multiplier:.5f}"
          f"  ({time.perf_counter() - t0:.0f} s)")


if __name__ == "__main__":
    main()
