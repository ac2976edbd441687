"""Removal ML degrees at a point, the Euler obstruction, and witness collections on disk.

The symbolic engine recomputes every level from scratch for each point.  The
numeric engine solves each level once at generic parameters (a witness
collection) and reaches any point ``p`` by a parameter homotopy to
``b = gamma @ p``.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import groebner
from .systems import (
    RandomSource,
    RemovalConfig,
    RemovalSystem,
    VarietySpec,
    lagrange_system,
    ml_degree_symbolic_resampled,
    removal_variety,
    sample_data,
    sample_gamma,
)
from .tracker import (
    Layout,
    TrackedPoint,
    TrackerSettings,
    TrackingFailure,
    WitnessSet,
    ambiguous,
    parameter_track,
    reclassify,
    solve_generic,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
ENGINES = ("symbolic", "numeric")
MANIFEST = "manifest.json"
TARGET = "target.json"
# draws of the generic parameters per level before accepting an ambiguous count
GENERIC_ATTEMPTS = 3


class InvalidPoint(ValueError):
    pass


class IncompleteRecord(ValueError):
    pass


class EngineFailure(RuntimeError):
    def __init__(self, k: int, message: str):
        super().__init__(f"k={k}: {message}")
        self.k = k


class CollectionError(ValueError):
    pass


class MissingManifest(CollectionError, FileNotFoundError):
    pass


class VersionMismatch(CollectionError):
    pass


def parse_point(values: Sequence, n: int) -> tuple[Fraction, ...]:
    """Exact coordinates from integers, fractions or decimal literals; all must be nonzero."""
    if len(values) != n:
        raise InvalidPoint(f"point has {len(values)} coordinates, expected {n}")
    out = []
    for v in values:
        try:
            q = v if isinstance(v, Fraction) else Fraction(str(v).strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidPoint(f"cannot read coordinate {v!r}") from exc
        if q == 0:
            raise InvalidPoint("the point must lie in the torus: every coordinate nonzero")
        out.append(q)
    return tuple(out)


# records and the alternating sum ---------------------------------------------


@dataclass(frozen=True)
class RemovalRecord:
    point: tuple
    variety: VarietySpec
    degrees: Mapping[int, int]
    engine: str

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        top = self.variety.dim + 1
        for k, r in self.degrees.items():
            if not 0 <= k <= top:
                raise ValueError(f"level {k} outside [0, {top}]")
            if r < 0:
                raise ValueError(f"negative degree at level {k}")

    @property
    def complete(self) -> bool:
        return set(self.degrees) == set(range(self.variety.dim + 2))

    def as_list(self) -> list[int]:
        return [self.degrees[k] for k in sorted(self.degrees)]

    @property
    def euler(self) -> int:
        return euler_obstruction(self)


def alternating_sum(degrees: Sequence[int]) -> int:
    return sum((-1) ** k * int(r) for k, r in enumerate(degrees))


def euler_obstruction(record: RemovalRecord) -> int:
    """``(-1)^d * sum_k (-1)^k r_k`` over ``k = 0..d+1``; integers only."""
    if not record.complete:
        missing = sorted(set(range(record.variety.dim + 2)) - set(record.degrees))
        raise IncompleteRecord(f"levels {missing} missing")
    d = record.variety.dim
    return (-1) ** d * alternating_sum(record.as_list())


# symbolic engine ---------------------------------------------------------------


def removal_degrees_symbolic(X: VarietySpec, point: Sequence, seed: int = 0, levels: Sequence[int] | None = None, **caps) -> RemovalRecord:
    """Each ``r_k`` as the ML degree of the removal variety with ``b = gamma @ p`` substituted."""
    X = X.to_field("QQ")
    p = parse_point(point, X.n)
    src = RandomSource(seed, "exact")
    gamma = sample_gamma(X.dim + 1, X.n, src)
    degrees = {}
    for k in levels if levels is not None else range(X.dim + 2):
        Z = removal_variety(X, RemovalConfig.through_point(k, gamma[:k], p))
        try:
            degrees[k], _ = ml_degree_symbolic_resampled(Z, src, k, **caps)
        except (groebner.ResourceCapExceeded, groebner.NotZeroDimensional) as exc:
            raise EngineFailure(k, str(exc)) from exc
        log.info("symbolic r_%d = %d", k, degrees[k])
    return RemovalRecord(p, X, degrees, "symbolic")


# witness collections -------------------------------------------------------------


@dataclass
class WitnessCollection:
    """Generic witness sets for every level, with the data needed to rebuild their systems.

    One ``gamma`` (``(d+1) x n``) serves all levels through its leading rows;
    ``data0`` is the data vector at level 0 and ``data1`` the one shared by the others.
    """

    variety: VarietySpec
    gamma: tuple[tuple[complex, ...], ...]
    data0: tuple[complex, ...]
    data1: tuple[complex, ...]
    witness: dict[int, WitnessSet]
    seed: int = 0
    tolerance: float = 1e-6
    settings: TrackerSettings = field(default_factory=TrackerSettings)
    directory: Path | None = None
    _systems: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def levels(self) -> range:
        return range(self.variety.dim + 2)

    def data(self, k: int) -> tuple[complex, ...]:
        return self.data0 if k == 0 else self.data1

    def system(self, k: int) -> RemovalSystem:
        if k not in self._systems:
            X = self.variety.to_field("CC")
            Z = removal_variety(X, RemovalConfig(k, self.gamma[:k], None, ()))
            self._systems[k] = lagrange_system(Z, self.data(k), k)
        return self._systems[k]

    def generic_degrees(self) -> dict[int, int]:
        return {k: ws.degree for k, ws in sorted(self.witness.items())}

    def target(self, k: int, point: Sequence) -> tuple[complex, ...]:
        if k == 0:
            return ()
        G = np.array(self.gamma[:k], dtype=complex)
        return tuple(complex(v) for v in G @ np.array([complex(Fraction(c)) for c in point]))


def compute_collection(
    X: VarietySpec,
    seed: int = 0,
    tolerance: float = 1e-6,
    settings: TrackerSettings = TrackerSettings(),
    start: str = "linear-product",
) -> WitnessCollection:
    """Sample gamma and data once, then solve every level at generic complex ``b``."""
    X = X.to_field("QQ")
    src = RandomSource(seed, "numeric")
    gamma = sample_gamma(X.dim + 1, X.n, src)
    data0 = sample_data(X.n, 0, src)
    data1 = sample_data(X.n, 1, src)
    wc = WitnessCollection(X, gamma, data0, data1, {}, seed, tolerance, settings)
    rng = np.random.default_rng(seed)
    for k in wc.levels:
        for attempt in range(GENERIC_ATTEMPTS):
            b = src.values(k)
            try:
                ws = solve_generic(wc.system(k), b, rng, settings, tolerance, start)
            except TrackingFailure as exc:
                raise EngineFailure(k, str(exc)) from exc
            close = ambiguous(ws)
            if not close:
                break
            # a root just inside the tolerance would be miscounted; draw new parameters
            log.warning("k=%d: %d regular points within tolerance of a hyperplane; redrawing b", k, close)
        wc.witness[k] = ws
        log.info("generic witness degree at k=%d: %d", k, ws.degree)
    return wc


def track_to_point(wc: WitnessCollection, point: Sequence, tolerance: float | None = None) -> tuple[RemovalRecord, dict[int, WitnessSet]]:
    """Removal degrees at ``point`` together with the classified endpoint sets."""
    p = parse_point(point, wc.variety.n)
    tol = wc.tolerance if tolerance is None else tolerance
    endpoints = {}
    for k in wc.levels:
        ws = wc.witness[k]
        if k == 0:
            # nothing depends on the point at level zero
            endpoints[k] = reclassify(ws, tol)
            continue
        rng = np.random.default_rng([wc.seed, k])
        endpoints[k] = parameter_track(wc.system(k), ws, wc.target(k, p), rng, tolerance=tol)
    degrees = {k: ws.degree for k, ws in endpoints.items()}
    return RemovalRecord(p, wc.variety, degrees, "numeric"), endpoints


def removal_degrees_numeric(
    X: VarietySpec,
    point: Sequence,
    seed: int = 0,
    witness_dir: str | os.PathLike | None = None,
    tolerance: float = 1e-6,
    settings: TrackerSettings = TrackerSettings(),
) -> RemovalRecord:
    """Reuse the collection in ``witness_dir`` when it holds one for ``X``; otherwise build (and save) it."""
    X = X.to_field("QQ")
    parse_point(point, X.n)
    wc = None
    if witness_dir is not None and (Path(witness_dir) / MANIFEST).exists():
        wc = load_collection(witness_dir)
        if _variety_key(wc.variety) != _variety_key(X):
            raise CollectionError(f"{witness_dir} holds a collection for a different variety")
    if wc is None:
        wc = compute_collection(X, seed, tolerance, settings)
        if witness_dir is not None:
            save_collection(wc, witness_dir)
    record, endpoints = track_to_point(wc, point, tolerance)
    if wc.directory is not None:
        save_target(wc.directory, record.point, endpoints)
    return record


def removal_ml_degrees(X: VarietySpec, point: Sequence | None = None, engine: str = "symbolic", seed: int = 0, **options) -> RemovalRecord:
    """All removal ML degrees ``r_0..r_{d+1}`` of ``X`` at ``point`` (default all ones)."""
    if point is None:
        point = (1,) * X.n
    if engine == "symbolic":
        return removal_degrees_symbolic(X, point, seed, **options)
    if engine == "numeric":
        return removal_degrees_numeric(X, point, seed, **options)
    raise ValueError(f"unknown engine {engine!r}")


@dataclass(frozen=True)
class CrossCheck:
    symbolic: RemovalRecord
    numeric: RemovalRecord

    @property
    def agreement(self) -> dict[int, bool]:
        return {k: self.symbolic.degrees[k] == self.numeric.degrees.get(k) for k in self.symbolic.degrees}

    @property
    def consistent(self) -> bool:
        return all(self.agreement.values())

    @property
    def euler(self) -> tuple[int, int]:
        return self.symbolic.euler, self.numeric.euler


def cross_check(X: VarietySpec, point: Sequence, seed: int = 0, **numeric_options) -> CrossCheck:
    """Run both engines; disagreements are reported through ``agreement``, never reconciled."""
    sym = removal_degrees_symbolic(X, point, seed)
    num = removal_degrees_numeric(X, point, seed, **numeric_options)
    return CrossCheck(sym, num)


# persistence --------------------------------------------------------------------


def _num(x: float) -> str:
    return f"{x:.17g}"


def _complex_out(z) -> list[str]:
    z = complex(z)
    return [_num(z.real), _num(z.imag)]


def _complex_in(pair) -> complex:
    re, im = pair
    return complex(float(re), float(im))


def _variety_key(X: VarietySpec):
    return X.ring.names, tuple(str(g) for g in X.generators), X.dim


def _atomic_write(path: Path, obj) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(obj, fh, indent=1)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _set_to_json(ws: WitnessSet) -> dict:
    return {
        "k": ws.k,
        "primal": ws.layout.primal,
        "multipliers": ws.layout.multipliers,
        "b": [_complex_out(v) for v in ws.b],
        "tolerance": _num(ws.tolerance),
        "points": [
            {
                "coordinates": [_complex_out(v) for v in p.coordinates],
                "status": p.status,
                "condition": _num(p.condition),
                "residual": _num(p.residual),
                "steps": p.steps,
                "t": _num(p.t),
                "weights": None if p.weights is None else [_num(w) for w in p.weights],
            }
            for p in ws.points
        ],
        "flags": [bool(f) for f in ws.flags],
    }


def _set_from_json(obj: dict, settings: TrackerSettings) -> WitnessSet:
    points = []
    for q in obj["points"]:
        w = q.get("weights")
        points.append(
            TrackedPoint(
                np.array([_complex_in(c) for c in q["coordinates"]], dtype=complex),
                q["status"],
                float(q["condition"]),
                float(q["residual"]),
                int(q["steps"]),
                float(q["t"]),
                None if w is None else np.array([float(v) for v in w]),
            )
        )
    flags = [bool(f) for f in obj["flags"]]
    if len(flags) != len(points):
        raise CollectionError(f"level {obj['k']}: {len(points)} points but {len(flags)} flags")
    layout = Layout(int(obj["primal"]), int(obj["multipliers"]))
    b = tuple(_complex_in(v) for v in obj["b"])
    return WitnessSet(int(obj["k"]), layout, points, flags, b, float(obj["tolerance"]), settings)


def _settings_to_json(s: TrackerSettings) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(s).items()}


def _settings_from_json(obj: dict) -> TrackerSettings:
    return TrackerSettings(**{k: tuple(v) if isinstance(v, list) else v for k, v in obj.items()})


def save_collection(wc: WitnessCollection, directory: str | os.PathLike) -> Path:
    """Level files first, the manifest last, each written to a temporary name and renamed."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    for k, ws in wc.witness.items():
        _atomic_write(path / f"witness_k{k}.json", _set_to_json(ws))
    manifest = {
        "format_version": FORMAT_VERSION,
        "variables": list(wc.variety.ring.names),
        "generators": [str(g) for g in wc.variety.generators],
        "dimension": wc.variety.dim,
        "seed": wc.seed,
        "tolerance": _num(wc.tolerance),
        "gamma": [[_complex_out(v) for v in row] for row in wc.gamma],
        "b": {str(k): [_complex_out(v) for v in ws.b] for k, ws in wc.witness.items()},
        "data0": [_complex_out(v) for v in wc.data0],
        "data1": [_complex_out(v) for v in wc.data1],
        "degrees": {str(k): d for k, d in wc.generic_degrees().items()},
        "settings": _settings_to_json(wc.settings),
    }
    _atomic_write(path / MANIFEST, manifest)
    wc.directory = path
    return path


def _read_json(path: Path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CollectionError(f"{path} is not valid JSON: {exc}") from exc


def load_collection(directory: str | os.PathLike) -> WitnessCollection:
    path = Path(directory)
    if not (path / MANIFEST).is_file():
        raise MissingManifest(f"no {MANIFEST} in {path}")
    m = _read_json(path / MANIFEST)
    if not isinstance(m, dict):
        raise CollectionError("manifest is not a JSON object")
    version = m.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"collection format {version!r}, this build reads {FORMAT_VERSION}")
    try:
        X = VarietySpec.from_strings(m["variables"], m["generators"], int(m["dimension"]))
        settings = _settings_from_json(m["settings"])
        gamma = tuple(tuple(_complex_in(v) for v in row) for row in m["gamma"])
        data0 = tuple(_complex_in(v) for v in m["data0"])
        data1 = tuple(_complex_in(v) for v in m["data1"])
        recorded = {int(k): int(d) for k, d in m["degrees"].items()}
        wc = WitnessCollection(X, gamma, data0, data1, {}, int(m["seed"]), float(m["tolerance"]), settings, path)
    except (KeyError, TypeError, ValueError) as exc:
        raise CollectionError(f"corrupt manifest: {exc}") from exc
    for k in wc.levels:
        f = path / f"witness_k{k}.json"
        if not f.is_file():
            raise CollectionError(f"missing {f.name}")
        try:
            wc.witness[k] = _set_from_json(_read_json(f), settings)
        except (KeyError, TypeError, ValueError) as exc:
            raise CollectionError(f"corrupt {f.name}: {exc}") from exc
        if wc.witness[k].degree != recorded.get(k):
            raise CollectionError(f"{f.name} counts {wc.witness[k].degree} points, manifest says {recorded.get(k)}")
    return wc


def save_target(directory: str | os.PathLike, point: Sequence, endpoints: Mapping[int, WitnessSet]) -> None:
    """Endpoint sets at one point, kept next to the collection so they can be reclassified."""
    path = Path(directory)
    for k, ws in endpoints.items():
        _atomic_write(path / f"target_k{k}.json", _set_to_json(ws))
    _atomic_write(path / TARGET, {"point": [str(c) for c in point], "levels": sorted(endpoints)})


def load_target(directory: str | os.PathLike, settings: TrackerSettings | None = None) -> tuple[tuple[Fraction, ...], dict[int, WitnessSet]]:
    path = Path(directory)
    if not (path / TARGET).is_file():
        raise CollectionError(f"no endpoint sets stored in {path}")
    t = _read_json(path / TARGET)
    settings = settings or TrackerSettings()
    sets = {}
    for k in t["levels"]:
        sets[int(k)] = _set_from_json(_read_json(path / f"target_k{k}.json"), settings)
    return tuple(Fraction(c) for c in t["point"]), sets


def reclassify_directory(directory: str | os.PathLike, tolerance: float) -> tuple[str, dict[int, int]]:
    """Reflag the stored endpoint sets (or the generic witness sets when no point was tracked).

    Returns which sets were reflagged and the new degrees.
    """
    path = Path(directory)
    wc = load_collection(path)
    if (path / TARGET).is_file():
        point, sets = load_target(path, wc.settings)
        sets = {k: reclassify(ws, tolerance) for k, ws in sets.items()}
        save_target(path, point, sets)
        return "target", {k: ws.degree for k, ws in sorted(sets.items())}
    wc.witness = {k: reclassify(ws, tolerance) for k, ws in wc.witness.items()}
    wc.tolerance = tolerance
    save_collection(wc, path)
    return "witness", wc.generic_degrees()
