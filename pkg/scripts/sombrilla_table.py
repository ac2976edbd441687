"""Removal ML degrees and Euler obstruction of the Whitney umbrella at four points, both engines."""

import argparse
import time

from mlobstruction import obstruction as ob
from mlobstruction.systems import VarietySpec

POINTS = [(3, 2, 1), (3, 3, 2), (1, 1, 2), (1, 1, 1)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--engine", choices=("symbolic", "numeric", "both"), default="both")
    args = ap.parse_args()

    X = VarietySpec.from_strings(["x1", "x2", "x3"], ["(x1-1)^2 - (x2-1)^2*(x3-1)"], 2)
    engines = ("symbolic", "numeric") if args.engine == "both" else (args.engine,)
    wc = None
    print(f"{'point':<12} {'engine':<9} {'r_0..r_3':<16} {'Eu':>3} {'sec':>6}")
    for p in POINTS:
        for engine in engines:
            t0 = time.perf_counter()
            if engine == "symbolic":
                rec = ob.removal_degrees_symbolic(X, p, args.seed)
            else:
                # the collection is built once and reused for every point
                wc = wc or ob.compute_collection(X, args.seed)
                rec, _ = ob.track_to_point(wc, p)
            dt = time.perf_counter() - t0
            print(f"{str(p):<12} {engine:<9} {str(rec.as_list()):<16} {rec.euler:>3} {dt:>6.1f}")


if __name__ == "__main__":
    main()
