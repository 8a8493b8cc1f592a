"""Coupling-strength sweep for the three-node matrix and the mapped k^2 band (Fig. 6)."""
import argparse
from pathlib import Path

from cycsync.models import LVParams
from cycsync.msf import ray_intervals
from cycsync.orbit import find_orbit
from cycsync.spectral import analyze, coupling_instability, read_matrix_csv

DATA = Path(__file__).resolve().parents[1] / "data"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=2.3427)
    ap.add_argument("--matrix", default=str(DATA / "three_node.csv"))
    ap.add_argument("--s-max", type=float, default=0.2)
    args = ap.parse_args()
    orbit = find_orbit(LVParams(args.alpha, 0.5))
    C = read_matrix_csv(args.matrix)
    lams = [z for z in analyze(C).eigenvalues if abs(z) > 1e-9]
    (lo, hi), = ray_intervals(orbit, 0.0, tol=1e-6)
    print("eigenvalues:", ", ".join(f"{z.real:+.4f}{z.imag:+.4f}j" for z in analyze(C).eigenvalues))
    for z in lams:
        print(f"lam={z.real:+.3f}: mapped D band ({-lo / z.real:.5f}, {-hi / z.real:.5f})")
    for a, b in coupling_instability(C, orbit, args.s_max, tol=1e-6):
        print(f"sweep: unstable for D in ({a:.5f}, {b:.5f})")


if __name__ == "__main__":
    main()
