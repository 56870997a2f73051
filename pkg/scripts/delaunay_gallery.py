"""Write OBJ meshes for one representative of each surface class.

    python scripts/delaunay_gallery.py --out gallery
"""

import argparse
import json
from pathlib import Path

from cmcflow.integrator import IntegratorConfig, detect_period, flow, integrate
from cmcflow.phase import ModelParams, classify
from cmcflow.surface import generate_mesh, write_obj

GALLERY = {
    "cylinder": ((0.5, 0.0, 0.5, 0.0), 0.0, 12.0),
    "unduloid": ((0.1, 0.0, 0.1, 0.0), 0.0, 22.0),
    "nodoid": ((1.0, 0.0, 0.0, 0.0), 0.0, 8.0),
    # the separatrix orbit takes infinite time at both ends; run it from -8 to 8
    "sphere": ((2**-0.5, 0.0, 2**-0.5, 0.0), -8.0, 8.0),
    "helicoidal": ((1.0, 0.0, 0.0, 1.0), 0.0, 8.0),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="gallery")
    ap.add_argument("--x-count", type=int, default=96)
    ap.add_argument("--stride", type=int, default=20)
    args = ap.parse_args()

    params = ModelParams()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for name, (y0, t0, t1) in GALLERY.items():
        start = y0
        if t0 != 0.0:
            start, _ = flow(y0, params, t0, IntegratorConfig(dt=1e-3, t_span=(0.0, 1e-3)))
        traj = integrate(start, params, IntegratorConfig(dt=1e-3, t_span=(t0, t1), record_stride=args.stride))
        mesh = generate_mesh(traj, args.x_count, (0.0, 6.283185307179586), params, frame="axis")
        write_obj(mesh, out / f"{name}.obj")
        summary[name] = {
            "class": str(classify(y0, params).tag),
            "vertices": int(mesh.points.shape[0]),
            "period": detect_period(traj) if t0 == 0.0 else None,
        }
        print(f"{name:>10}  {summary[name]['class']:<14} {mesh.points.shape[0]:>7} vertices")
    with open(out / "gallery.json", "w") as fh:
        json.dump(summary, fh, indent=2)


if __name__ == "__main__":
    main()
