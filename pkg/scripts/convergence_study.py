"""Step-size and resolution studies.

1. Energy drift of both integrators against dt.
2. Path discrepancy of the generic inducer against the grid size N.
"""

import argparse

import numpy as np

from cmcflow import field as fld
from cmcflow.integrator import energy_drift_order
from cmcflow.phase import ModelParams


def drift_table(params, t_end):
    dts = [8e-3, 4e-3, 2e-3, 1e-3]
    for method in ("midpoint", "gauss4"):
        drifts, orders = energy_drift_order((1.0, 0.0, 0.0, 0.0), params, dts, t_end, method=method)
        print(f"\n{method}: max |E(t) - E(0)| over [0, {t_end:g}]")
        for i, dt in enumerate(dts):
            o = f"{orders[i - 1]:6.3f}" if i else "     -"
            print(f"  dt {dt:7.1e}  drift {drifts[i]:10.3e}  order {o}")


def path_table(params, sizes, seed):
    print("\ngeneric inducer: t-then-x against x-then-t")
    for n in sizes:
        rng = np.random.default_rng(seed)
        f0 = fld.ansatz_field((0.1, 0.0, 0.1, 0.0), params, n=n)
        noise = fld.smooth_random_field(rng, n=n, amplitude=1e-3)
        start = fld.FieldState(f0.length, f0.psi1 + noise.psi1, f0.psi2 + noise.psi2)
        fields = fld.evolve(start, params, 1e-3, 1.0, stride=10)
        a = fld.induce_generic(fields, params, "tx")
        b = fld.induce_generic(fields, params, "xt")
        print(f"  N {n:4d}  max discrepancy {np.abs(a.points - b.points).max():.3e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=20.0)
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256, 512])
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    params = ModelParams()
    drift_table(params, args.t_end)
    path_table(params, args.sizes, args.seed)


if __name__ == "__main__":
    main()
