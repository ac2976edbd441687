from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlobstruction.ring import (
    CC,
    QQ,
    Polynomial,
    PolynomialSyntaxError,
    RingMismatchError,
    UnknownVariableError,
    VariableRing,
    jacobian,
    minors,
    parse,
)

R3 = VariableRing(("x1", "x2", "x3"), QQ)
RC = VariableRing(("x1", "x2", "x3"), CC)

small = st.fractions(min_value=-5, max_value=5, max_denominator=4)
exps = st.tuples(*[st.integers(0, 3)] * 3)


@st.composite
def polys(draw, ring=R3):
    terms = draw(st.dictionaries(exps, small, max_size=5))
    return Polynomial(ring, terms)


@st.composite
def cpolys(draw):
    terms = draw(st.dictionaries(exps, st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), max_size=4))
    return Polynomial(RC, terms)


def P(s, ring=R3):
    return parse(s, ring)


def test_sombrilla_expands_to_eight_terms():
    # expansion checked with sympy: x1^2 - 2x1 - x2^2 x3 + x2^2 + 2 x2 x3 - 2 x2 - x3 + 2
    f = P("(x1-1)^2-(x2-1)^2*(x3-1)")
    assert len(f) == 8
    assert f == P("x1^2 - 2*x1 - x2^2*x3 + x2^2 + 2*x2*x3 - 2*x2 - x3 + 2")


@pytest.mark.parametrize("text", ["0", "x1*x2 - x2*x1", "  (x1 + x2) - x2 - x1 "])
def test_zero_results(text):
    assert P(text).is_zero()
    assert len(P(text).terms) == 0


def test_literals():
    assert P("3/7*x1") == Polynomial(R3, {(1, 0, 0): Fraction(3, 7)})
    assert P("0.25*x2") == Polynomial(R3, {(0, 1, 0): Fraction(1, 4)})
    assert P("-x3^2") == Polynomial(R3, {(0, 0, 2): -1})


@pytest.mark.parametrize("bad", ["x1 +", "(x1", "x1 */ 2", "2x1 )", "x1^x2"])
def test_syntax_errors_carry_position(bad):
    with pytest.raises(PolynomialSyntaxError) as err:
        P(bad)
    assert err.value.position >= 0


def test_unknown_variable():
    with pytest.raises(UnknownVariableError):
        P("x1 + z")


def test_arithmetic_examples():
    x = P("x1")
    assert (x + 1) * (x - 1) == P("x1^2 - 1")
    f = P("x1^3 - x2")
    assert f + R3.zero() == f
    assert (P("x1 + x2") * P("x1 + x2")) == P("x1^2 + 2*x1*x2 + x2^2")


def test_ring_mismatch():
    other = VariableRing(("x1", "x2", "x4"), QQ)
    with pytest.raises(RingMismatchError):
        P("x1") + parse("x1", other)


def test_partials():
    assert P("(x1-1)^2").partial(0) == P("2*x1 - 2")
    assert P("(x2-1)^2*(x3-1)").partial(2) == P("(x2-1)^2")
    assert P("17/3").partial(1).is_zero()


def test_evaluate():
    f = P("(x1-1)^2-(x2-1)^2*(x3-1)")
    assert f.evaluate((1, 1, 1)) == 0
    assert f.evaluate((3, 2, 1)) == 4
    g = P("x1*x3 + 5*x2 - 7/2")
    assert g.evaluate((0, 0, 0)) == Fraction(-7, 2)
    with pytest.raises(ValueError):
        g.evaluate((1, 2))


def test_jacobian():
    f = P("(x1-1)^2-(x2-1)^2*(x3-1)")
    assert jacobian([f]) == [[P("2*x1-2"), P("-2*(x2-1)*(x3-1)"), P("-(x2-1)^2")]]
    lin = [P("2*x1 - x3 + 4"), P("x2 + 5*x3")]
    assert jacobian(lin) == [[R3.constant(2), R3.zero(), R3.constant(-1)], [R3.zero(), R3.one(), R3.constant(5)]]
    assert jacobian([P("x1^2"), P("x2^2")], [0, 1]) == [[P("2*x1"), R3.zero()], [R3.zero(), P("2*x2")]]
    with pytest.raises(ValueError):
        jacobian([])


def test_minors():
    a, b, c, d = (P(s) for s in ("x1", "x2", "x3", "x1*x2"))
    assert sorted(map(str, minors([[a, b], [c, d]], 1))) == sorted(map(str, [a, b, c, d]))
    x, y = P("x1"), P("x2")
    assert minors([[x, y], [y, x]], 2) == [P("x1^2 - x2^2")]
    assert len(minors([[x, y, a], [y, x, c]], 2)) == 3
    with pytest.raises(ValueError):
        minors([[x, y]], 2)


@given(polys())
def test_parse_print_roundtrip(f):
    assert P(str(f)) == f


@given(polys(), polys(), polys())
def test_ring_axioms_exact(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


def _close(p, q, rel=1e-10):
    keys = set(p.terms) | set(q.terms)
    scale = max([abs(v) for v in list(p.terms.values()) + list(q.terms.values())] + [1.0])
    return all(abs(p.terms.get(k, 0) - q.terms.get(k, 0)) <= rel * scale for k in keys)


@given(cpolys(), cpolys(), cpolys())
def test_ring_axioms_float(a, b, c):
    assert _close(a * b, b * a)
    assert _close((a * b) * c, a * (b * c))
    assert _close(a * (b + c), a * b + a * c)


@given(polys(), polys(), st.tuples(small, small, small))
def test_evaluation_is_multiplicative(a, b, pt):
    assert (a * b).evaluate(pt) == a.evaluate(pt) * b.evaluate(pt)


@given(polys(), polys(), st.integers(0, 2))
def test_product_rule(a, b, v):
    assert (a * b).partial(v) == a.partial(v) * b + a * b.partial(v)


@given(polys())
def test_no_zero_coefficients_stored(f):
    assert all(c != 0 for c in f.terms.values())
