"""Numeric removal ML degrees for the two 3x3 Hankel-type determinantal hypersurfaces.

    python scripts/hankel_tables.py --variety 1 --seeds 0 1 2
    python scripts/hankel_tables.py --variety 2 --save /tmp/x2
"""

import argparse
import time

from mlobstruction import obstruction as ob
from mlobstruction.systems import VarietySpec

VARIETIES = {
    1: (
        ["x1", "x2", "x3", "x4"],
        "x1*(x3-x4^2) - x2*(x2-x3*x4) + x3*(x2*x4-x3^2)",
        3,
        [(7, 5, 3, 2), (2, 1, 1, 1), (1, 1, 1, 1)],
    ),
    2: (
        ["x1", "x2", "x3", "x4", "x5"],
        "x1*(x4-x5^2) - x2*(x2-x3*x5) + x3*(x2*x5-x3*x4)",
        4,
        [(1, 2, 3, 5, 7), (1, 1, 1, 1, 2), (1, 1, 1, 2, 1), (1, 1, 1, 1, 1)],
    ),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--variety", type=int, choices=(1, 2), default=1)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--points", nargs="*", help="extra points, e.g. 3,1,2,5")
    ap.add_argument("--save", help="directory for the collection of the first seed")
    args = ap.parse_args()

    names, gen, dim, points = VARIETIES[args.variety]
    points = points + [tuple(int(c) for c in s.split(",")) for s in args.points or []]
    X = VarietySpec.from_strings(names, [gen], dim)
    for i, seed in enumerate(args.seeds):
        t0 = time.perf_counter()
        wc = ob.compute_collection(X, seed)
        print(f"seed {seed}: generic {list(wc.generic_degrees().values())} ({time.perf_counter() - t0:.0f}s)")
        if args.save and i == 0:
            ob.save_collection(wc, args.save)
        for p in points:
            t0 = time.perf_counter()
            rec, _ = ob.track_to_point(wc, p)
            print(f"  {str(p):<18} {str(rec.as_list()):<26} Eu {rec.euler:>2}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
