"""How the counted endpoints at a point change with the hyperplane tolerance.

Tracks the umbrella collection to the point once, then only reclassifies.
"""

import argparse

import numpy as np

from mlobstruction import obstruction as ob
from mlobstruction.systems import VarietySpec
from mlobstruction.tracker import reclassify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--point", default="1,1,1")
    args = ap.parse_args()

    X = VarietySpec.from_strings(["x1", "x2", "x3"], ["(x1-1)^2 - (x2-1)^2*(x3-1)"], 2)
    wc = ob.compute_collection(X, args.seed)
    point = [int(c) for c in args.point.split(",")]
    _, ends = ob.track_to_point(wc, point)
    for k, ws in ends.items():
        mags = ws.layout.min_magnitude(ws.coordinates(), np.array([p.weights for p in ws.points]) if ws.points else None)
        conds = [p.condition for p in ws.points]
        print(f"k={k}: {len(ws.points)} endpoints; smallest hyperplane distances {np.sort(mags)[:4]}; worst condition {max(conds, default=0):.1e}")
    print(f"{'tolerance':>10}  degrees")
    for e in (-300, -100, -30, -16, -12, -9, -6, -4, -2, 0, 1):
        tol = 10.0**e
        print(f"{tol:>10.0e}  {[reclassify(ws, tol).degree for ws in ends.values()]}")


if __name__ == "__main__":
    main()
