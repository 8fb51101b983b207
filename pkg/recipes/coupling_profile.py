"""Coupling to a 10 um square loop: on-axis profile and thermal spread.

Prints the on-axis coupling at 4, 5 and 6 um above the loop plane, then the
median and width of the coupling distribution for trap temperatures from
0.1 to 10 uK. Writes ``coupling_vs_temperature.csv``.

    python recipes/coupling_profile.py --out out/recipes
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from srlab.chip import CircuitSpec, LoopGeometry, TrapSpec, coupling, coupling_distribution, coupling_scale

D = 10e-6
CIRCUIT = CircuitSpec(inductance=1e-12, omega=2 * math.pi * 6.834682610904e9, d=D, quality=1000)
LOOP = LoopGeometry.square(D)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("out/recipes"))
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    print(f"G/2pi = {coupling_scale(CIRCUIT) / (2 * math.pi):.1f} Hz")
    g5 = coupling([D / 2, D / 2, 5e-6], CIRCUIT) / (2 * math.pi)
    for z in (4, 5, 6):
        g = coupling([D / 2, D / 2, z * 1e-6], CIRCUIT) / (2 * math.pi)
        print(f"z = {z} um: -g/2pi = {-g:7.1f} Hz   ratio to 5 um {g / g5:.4f}")

    w = 2 * math.pi * 1e3
    rows = []
    for T in (1e-7, 3e-7, 1e-6, 3e-6, 1e-5):
        trap = TrapSpec((w, w, w), (D / 2, D / 2, D), temperature=T)
        h = coupling_distribution(trap, CIRCUIT, LOOP, args.samples, seed=args.seed, bins=60)
        x = h.g_over_G
        lo, med, hi = np.percentile(x, [5, 50, 95])
        rows.append((T, x.mean(), med, lo, hi))
        print(f"T = {T * 1e6:5.1f} uK: mean g/G {x.mean():+.3f}, median {med:+.3f}, 90% range [{lo:+.3f}, {hi:+.3f}]")

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "coupling_vs_temperature.csv", "w", newline="") as fh:
        w_ = csv.writer(fh, lineterminator="\n")
        w_.writerow(["temperature_k", "mean_g_over_G", "median_g_over_G", "p05", "p95"])
        w_.writerows(rows)


if __name__ == "__main__":
    main()
