"""Command-line front end.

    mlobstruction solve problem.json [--engine E] [--point a,b,c] [--json]
    mlobstruction witness compute problem.json --dir DIR
    mlobstruction witness reuse DIR [--point a,b,c]
    mlobstruction euler problem.json | --dim D --degrees r0,r1,...
    mlobstruction reclassify --tol T DIR

Exit status: 0 on success, 1 for unreadable or invalid input, 2 when an
engine fails.  Set MLOBSTRUCTION_WORKERS to track paths in parallel.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import groebner, obstruction as ob
from .ring import PolynomialSyntaxError
from .systems import NotCompleteIntersection, VarietySpec
from .tracker import TrackingFailure

DEFAULT_SEED = 0
RESULT_KEYS = {"degrees", "euler", "agree"}


class UsageError(ValueError):
    pass


@dataclass
class Problem:
    variables: list[str]
    generators: list[str]
    point: tuple[Fraction, ...]
    dimension: int | None = None
    engine: str = "symbolic"
    seed: int = DEFAULT_SEED
    tolerance: float = 1e-6
    witness_dir: str | None = None

    FIELDS = ("variables", "generators", "point", "dimension", "engine", "seed", "tolerance", "witness_dir")

    @classmethod
    def from_dict(cls, obj: dict) -> "Problem":
        if not isinstance(obj, dict):
            raise UsageError("problem file must hold a JSON object")
        unknown = set(obj) - set(cls.FIELDS) - RESULT_KEYS
        if unknown:
            raise UsageError(f"unknown problem keys: {sorted(unknown)}")
        try:
            variables = [str(v) for v in obj["variables"]]
            generators = [str(g) for g in obj.get("generators", [])]
        except KeyError as exc:
            raise UsageError(f"problem is missing {exc}") from None
        engine = obj.get("engine", "symbolic")
        if engine not in ("symbolic", "numeric", "both"):
            raise UsageError(f"engine must be symbolic, numeric or both, not {engine!r}")
        raw_point = obj.get("point") or [1] * len(variables)
        dim = obj.get("dimension")
        tol = float(obj.get("tolerance", 1e-6))
        if tol <= 0:
            raise UsageError("tolerance must be positive")
        return cls(
            variables,
            generators,
            ob.parse_point(raw_point, len(variables)),
            None if dim is None else int(dim),
            engine,
            int(obj.get("seed", DEFAULT_SEED)),
            tol,
            obj.get("witness_dir"),
        )

    @classmethod
    def load(cls, path: str) -> "Problem":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None

    def variety(self) -> VarietySpec:
        return VarietySpec.from_strings(self.variables, self.generators, self.dimension)

    def to_dict(self) -> dict:
        return {
            "variables": self.variables,
            "generators": self.generators,
            "point": [str(c) for c in self.point],
            "dimension": self.dimension,
            "engine": self.engine,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "witness_dir": self.witness_dir,
        }


def _point_arg(text: str) -> list[str]:
    return [t for t in text.replace(" ", "").split(",") if t]


def _apply_overrides(problem: Problem, args) -> Problem:
    if getattr(args, "engine", None):
        problem.engine = args.engine
    if getattr(args, "seed", None) is not None:
        problem.seed = args.seed
    if getattr(args, "tol", None) is not None:
        if args.tol <= 0:
            raise UsageError("tolerance must be positive")
        problem.tolerance = args.tol
    if getattr(args, "point", None):
        problem.point = ob.parse_point(_point_arg(args.point), len(problem.variables))
    if getattr(args, "witness_dir", None):
        problem.witness_dir = args.witness_dir
    return problem


def _records(problem: Problem) -> dict[str, ob.RemovalRecord]:
    X = problem.variety()
    out = {}
    engines = ("symbolic", "numeric") if problem.engine == "both" else (problem.engine,)
    for engine in engines:
        if engine == "symbolic":
            out[engine] = ob.removal_degrees_symbolic(X, problem.point, problem.seed)
        else:
            out[engine] = ob.removal_degrees_numeric(
                X, problem.point, problem.seed, witness_dir=problem.witness_dir, tolerance=problem.tolerance
            )
    return out


def _table(records: dict[str, ob.RemovalRecord], point) -> str:
    first = next(iter(records.values()))
    levels = range(first.variety.dim + 2)
    head = ["engine"] + [f"r_{k}" for k in levels] + ["Eu"]
    rows = [[name] + [str(rec.degrees[k]) for k in levels] + [str(rec.euler)] for name, rec in records.items()]
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    lines = [f"point  ({', '.join(str(c) for c in point)})", f"dim    {first.variety.dim}", fmt(head)]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines)


def _emit_records(problem: Problem, records, as_json: bool) -> None:
    agree = None
    if len(records) == 2:
        s, n = records["symbolic"], records["numeric"]
        agree = s.degrees == n.degrees
        if not agree:
            print(f"engines disagree: symbolic {s.as_list()} vs numeric {n.as_list()}", file=sys.stderr)
    if as_json:
        doc = problem.to_dict()
        doc["degrees"] = {name: rec.as_list() for name, rec in records.items()}
        doc["euler"] = {name: rec.euler for name, rec in records.items()}
        if agree is not None:
            doc["agree"] = agree
        print(json.dumps(doc, indent=1))
    else:
        print(_table(records, problem.point))


def cmd_solve(args) -> int:
    problem = _apply_overrides(Problem.load(args.problem), args)
    _emit_records(problem, _records(problem), args.json)
    return 0


def cmd_euler(args) -> int:
    if args.degrees is not None:
        if args.dim is None:
            raise UsageError("--degrees needs --dim")
        try:
            degrees = [int(v) for v in _point_arg(args.degrees)]
        except ValueError:
            raise UsageError("degrees must be integers") from None
        if len(degrees) != args.dim + 2 or any(r < 0 for r in degrees):
            raise UsageError(f"need {args.dim + 2} nonnegative degrees for dimension {args.dim}")
        eu = (-1) ** args.dim * ob.alternating_sum(degrees)
        print(json.dumps({"dimension": args.dim, "degrees": degrees, "euler": eu}) if args.json else eu)
        return 0
    if not args.problem:
        raise UsageError("euler needs a problem file or --dim with --degrees")
    problem = _apply_overrides(Problem.load(args.problem), args)
    records = _records(problem)
    if args.json:
        _emit_records(problem, records, True)
    else:
        for name, rec in records.items():
            print(f"{name}: Eu = {rec.euler}")
    return 0


def cmd_witness(args) -> int:
    if args.action == "compute":
        problem = _apply_overrides(Problem.load(args.target), args)
        directory = problem.witness_dir
        if not directory:
            raise UsageError("give --dir or witness_dir in the problem file")
        wc = ob.compute_collection(problem.variety(), problem.seed, problem.tolerance)
        ob.save_collection(wc, directory)
        degrees = list(wc.generic_degrees().values())
        if args.json:
            print(json.dumps({"directory": str(directory), "generic_degrees": degrees}))
        else:
            print(f"saved {directory}: generic degrees {degrees}")
        return 0
    wc = ob.load_collection(args.target)
    if args.point:
        point = ob.parse_point(_point_arg(args.point), wc.variety.n)
    else:
        point = (Fraction(1),) * wc.variety.n
    record, endpoints = ob.track_to_point(wc, point, args.tol)
    ob.save_target(args.target, record.point, endpoints)
    problem = Problem(
        list(wc.variety.ring.names), [str(g) for g in wc.variety.generators], record.point,
        wc.variety.dim, "numeric", wc.seed, args.tol or wc.tolerance, str(args.target),
    )
    _emit_records(problem, {"numeric": record}, args.json)
    return 0


def cmd_reclassify(args) -> int:
    if args.tol <= 0:
        raise UsageError("tolerance must be positive")
    which, degrees = ob.reclassify_directory(args.directory, args.tol)
    values = list(degrees.values())
    if args.json:
        print(json.dumps({"directory": args.directory, "sets": which, "tolerance": args.tol, "degrees": values}))
    else:
        print(f"{which} sets at tolerance {args.tol:g}: {values}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlobstruction", description="Euler obstructions from removal ML degrees.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, engine=True):
        if engine:
            p.add_argument("--engine", choices=("symbolic", "numeric", "both"))
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--point", help="comma-separated coordinates, e.g. 1,1,2 or 1/2,3,0.5")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("solve", help="removal ML degrees and Euler obstruction at a point")
    p.add_argument("problem")
    p.add_argument("--witness-dir", dest="witness_dir")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("euler", help="Euler obstruction from a problem file or from given degrees")
    p.add_argument("problem", nargs="?")
    p.add_argument("--dim", type=int)
    p.add_argument("--degrees")
    p.add_argument("--witness-dir", dest="witness_dir")
    common(p)
    p.set_defaults(func=cmd_euler)

    p = sub.add_parser("witness", help="build or reuse a witness collection")
    p.add_argument("action", choices=("compute", "reuse"))
    p.add_argument("target", help="problem file (compute) or collection directory (reuse)")
    p.add_argument("--dir", dest="witness_dir")
    common(p, engine=False)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("reclassify", help="reflag stored endpoints at a new tolerance")
    p.add_argument("directory")
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_reclassify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ob.EngineFailure, groebner.ResourceCapExceeded, groebner.NotZeroDimensional, TrackingFailure, NotCompleteIntersection) as exc:
        print(f"error: engine failure: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ob.InvalidPoint, ob.CollectionError, PolynomialSyntaxError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
