"""Sweep the M = 0 plane and tabulate surface classes by energy band.

Also checks that no sampled state falls below the equilibrium energy.
"""

import argparse
import collections

import numpy as np

from cmcflow.phase import ModelParams, classify, equilibrium_energy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=0.5)
    ap.add_argument("--H", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=201)
    ap.add_argument("--extent", type=float, default=1.0)
    ap.add_argument("--bands", type=int, default=8)
    ap.add_argument("--csv", default=None, help="optional per-point output")
    args = ap.parse_args()

    params = ModelParams(args.lam, args.H)
    g = np.linspace(-args.extent, args.extent, args.n)
    records = []
    for p1 in g:
        for q1 in g:
            c = classify((p1, 0.0, q1, 0.0), params)
            records.append((p1, q1, c.energy, str(c.tag)))

    energies = np.array([r[2] for r in records])
    e_eq = equilibrium_energy(params)
    print(f"equilibrium energy {e_eq:.12g}, sampled minimum {energies.min():.12g}")
    edges = np.linspace(energies.min(), energies.max(), args.bands + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        tags = collections.Counter(r[3] for r in records if lo <= r[2] <= hi)
        row = ", ".join(f"{k} {v}" for k, v in sorted(tags.items()))
        print(f"[{lo:+.4f}, {hi:+.4f}]  {row}")

    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("p1,q1,H0,class_tag\n")
            for p1, q1, e, tag in records:
                fh.write(f"{p1:.17g},{q1:.17g},{e:.17g},{tag}\n")


if __name__ == "__main__":
    main()
