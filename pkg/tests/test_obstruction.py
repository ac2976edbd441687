import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlobstruction import obstruction as ob
from mlobstruction.systems import VarietySpec

# (dimension, degrees, Euler obstruction) for every row of the benchmark tables
TABLE_ROWS = [
    (2, (3, 10, 10, 3), 0),
    (2, (3, 10, 10, 2), 1),
    (2, (3, 10, 10, 1), 2),
    (2, (3, 10, 9, 1), 1),
    (3, (0, 16, 31, 18, 3), 0),
    (3, (0, 16, 31, 18, 2), 1),
    (3, (0, 16, 31, 16, 1), 0),
    (4, (0, 16, 47, 49, 21, 3), 0),
    (4, (0, 16, 47, 49, 21, 2), 1),
    (4, (0, 16, 47, 49, 19, 1), 0),
]


def _spec(dim):
    names = [f"x{i}" for i in range(1, dim + 2)]
    return VarietySpec.from_strings(names, [" + ".join(names) + " - 1"], dim)


@pytest.mark.parametrize("dim,degrees,eu", TABLE_ROWS)
def test_euler_of_table_rows(dim, degrees, eu):
    rec = ob.RemovalRecord((Fraction(1),) * (dim + 1), _spec(dim), dict(enumerate(degrees)), "symbolic")
    assert rec.complete
    assert ob.euler_obstruction(rec) == rec.euler == eu
    assert isinstance(rec.euler, int)


@given(st.integers(0, 4).flatmap(lambda d: st.tuples(st.just(d), st.lists(st.integers(0, 10**6), min_size=d + 2, max_size=d + 2))))
def test_euler_is_signed_alternating_sum(case):
    d, degrees = case
    rec = ob.RemovalRecord((Fraction(1),) * (d + 1), _spec(d), dict(enumerate(degrees)), "numeric")
    assert rec.euler == (-1) ** d * sum((-1) ** k * r for k, r in enumerate(degrees))


def test_incomplete_record():
    rec = ob.RemovalRecord((Fraction(1),) * 3, _spec(2), {0: 3, 1: 10, 3: 1}, "symbolic")
    assert not rec.complete
    with pytest.raises(ob.IncompleteRecord, match=r"\[2\]"):
        rec.euler


def test_record_validation():
    with pytest.raises(ValueError):
        ob.RemovalRecord((1,), _spec(0), {0: -1}, "symbolic")
    with pytest.raises(ValueError):
        ob.RemovalRecord((1,), _spec(0), {5: 1}, "symbolic")
    with pytest.raises(ValueError):
        ob.RemovalRecord((1,), _spec(0), {0: 1}, "exact")


def test_parse_point():
    assert ob.parse_point(["1/2", 3, "0.25"], 3) == (Fraction(1, 2), Fraction(3), Fraction(1, 4))
    with pytest.raises(ob.InvalidPoint):
        ob.parse_point([1, 0, 2], 3)
    with pytest.raises(ob.InvalidPoint):
        ob.parse_point([1, 2], 3)
    with pytest.raises(ob.InvalidPoint):
        ob.parse_point(["one", 2], 2)


def test_zero_coordinate_rejected_by_both_engines(sombrilla):
    for engine in ("symbolic", "numeric"):
        with pytest.raises(ob.InvalidPoint):
            ob.removal_ml_degrees(sombrilla, (1, 0, 1), engine)
    with pytest.raises(ValueError):
        ob.removal_ml_degrees(sombrilla, (1, 1, 1), "guess")


# Toy curves.  A plane curve C of degree e, with the extra coordinate H,
# has ML degree -chi of C minus its points on x=0, y=0, H=0 and at infinity,
# so a line gives (1, 2, .) and a conic (4, 6, .).  The last level counts the
# points of C on a line through p other than p itself.
TOYS = [
    (["2*x + 3*y - 5"], (1, 1), [1, 2, 0], 1),
    (["2*x + 3*y - 5"], (2, 3), [1, 2, 1], 0),
    (["x^2 + y^2 - 1"], (Fraction(3, 5), Fraction(4, 5)), [4, 6, 1], 1),
    (["x^2 + y^2 - 1"], (3, 5), [4, 6, 2], 0),
]


@pytest.mark.parametrize("gens,point,degrees,eu", TOYS)
def test_cross_check_toys(gens, point, degrees, eu):
    X = VarietySpec.from_strings(["x", "y"], gens)
    c = ob.cross_check(X, point, seed=3)
    assert c.consistent
    assert c.symbolic.as_list() == c.numeric.as_list() == degrees
    assert c.euler == (eu, eu)


def test_cross_check_reports_disagreement():
    X = VarietySpec.from_strings(["x", "y"], ["2*x + 3*y - 5"])
    sym = ob.RemovalRecord((Fraction(1),) * 2, X, {0: 1, 1: 2, 2: 0}, "symbolic")
    num = ob.RemovalRecord((Fraction(1),) * 2, X, {0: 1, 1: 1, 2: 0}, "numeric")
    c = ob.CrossCheck(sym, num)
    assert c.agreement == {0: True, 1: False, 2: True}
    assert not c.consistent


@pytest.fixture(scope="module")
def collection_dir(tmp_path_factory):
    X = VarietySpec.from_strings(["x1", "x2", "x3"], ["(x1-1)^2 - (x2-1)^2*(x3-1)"], 2)
    wc = ob.compute_collection(X, seed=1)
    path = tmp_path_factory.mktemp("collection")
    ob.save_collection(wc, path)
    return wc, path


def test_collection_generic_degrees(collection_dir):
    wc, _ = collection_dir
    assert list(wc.generic_degrees().values()) == [3, 10, 10, 3]


def test_collection_layout_on_disk(collection_dir):
    _, path = collection_dir
    names = sorted(p.name for p in path.iterdir())
    assert names == ["manifest.json"] + [f"witness_k{k}.json" for k in range(4)]
    m = json.loads((path / "manifest.json").read_text())
    assert m["format_version"] == ob.FORMAT_VERSION
    assert m["dimension"] == 2
    assert m["degrees"] == {"0": 3, "1": 10, "2": 10, "3": 3}
    w = json.loads((path / "witness_k1.json").read_text())
    re_, im_ = w["points"][0]["coordinates"][0]
    # decimal strings carrying 17 significant digits
    assert isinstance(re_, str) and float(re_) == float(f"{float(re_):.17g}")


def test_round_trip_is_exact(collection_dir):
    wc, path = collection_dir
    back = ob.load_collection(path)
    assert back.generic_degrees() == wc.generic_degrees()
    assert back.gamma == wc.gamma and back.data0 == wc.data0 and back.data1 == wc.data1
    for k in wc.levels:
        a, b = wc.witness[k], back.witness[k]
        assert a.b == b.b and a.flags == b.flags
        assert np.array_equal(a.coordinates(), b.coordinates())
        assert [p.status for p in a.points] == [p.status for p in b.points]


def test_reloaded_collection_tracks_to_singular_point(collection_dir):
    _, path = collection_dir
    wc = ob.load_collection(path)
    record, endpoints = ob.track_to_point(wc, (1, 1, 1))
    assert record.as_list() == [3, 10, 9, 1]
    assert record.euler == 1
    # specialization can only lose points
    for k, ws in endpoints.items():
        assert ws.degree <= wc.witness[k].degree


def test_empty_directory_has_distinct_error(tmp_path):
    with pytest.raises(ob.MissingManifest):
        ob.load_collection(tmp_path)
    with pytest.raises(FileNotFoundError):
        ob.load_collection(tmp_path / "nowhere")


def _copy(src, dst):
    for f in src.iterdir():
        (dst / f.name).write_bytes(f.read_bytes())


def test_version_mismatch(collection_dir, tmp_path):
    _, path = collection_dir
    _copy(path, tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["format_version"] = ob.FORMAT_VERSION + 1
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(ob.VersionMismatch):
        ob.load_collection(tmp_path)


def test_corrupt_manifest_and_missing_level(collection_dir, tmp_path):
    _, path = collection_dir
    _copy(path, tmp_path)
    (tmp_path / "witness_k2.json").unlink()
    with pytest.raises(ob.CollectionError, match="witness_k2"):
        ob.load_collection(tmp_path)
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(ob.CollectionError):
        ob.load_collection(tmp_path)


def test_manifest_degree_mismatch_detected(collection_dir, tmp_path):
    _, path = collection_dir
    _copy(path, tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["degrees"]["1"] = 11
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(ob.CollectionError, match="manifest says 11"):
        ob.load_collection(tmp_path)


def test_reclassify_directory_uses_stored_endpoints(collection_dir, tmp_path):
    _, path = collection_dir
    _copy(path, tmp_path)
    which, degrees = ob.reclassify_directory(tmp_path, 1e-6)
    assert which == "witness" and list(degrees.values()) == [3, 10, 10, 3]
    wc = ob.load_collection(tmp_path)
    record, endpoints = ob.track_to_point(wc, (1, 1, 1))
    ob.save_target(tmp_path, record.point, endpoints)
    which, degrees = ob.reclassify_directory(tmp_path, 1e-6)
    assert which == "target" and list(degrees.values()) == [3, 10, 9, 1]
    assert list(ob.reclassify_directory(tmp_path, 1e3)[1].values()) == [0, 0, 0, 0]


def test_numeric_engine_reuses_directory(collection_dir, tmp_path, sombrilla):
    _, path = collection_dir
    _copy(path, tmp_path)
    rec = ob.removal_degrees_numeric(sombrilla, (3, 2, 1), seed=99, witness_dir=tmp_path)
    assert rec.as_list() == [3, 10, 10, 3] and rec.euler == 0
    point, _ = ob.load_target(tmp_path)
    assert point == (3, 2, 1)
    other = VarietySpec.from_strings(["x1", "x2", "x3"], ["x1 - x2*x3"], 2)
    with pytest.raises(ob.CollectionError):
        ob.removal_degrees_numeric(other, (1, 1, 1), witness_dir=tmp_path)


def test_symbolic_levels_subset(sombrilla):
    rec = ob.removal_degrees_symbolic(sombrilla, (1, 1, 1), levels=[0, 3])
    assert rec.degrees == {0: 3, 3: 1}
    assert not rec.complete
