"""Sparse multivariate polynomials over exact rationals or complex floats.

Polynomials are immutable maps from exponent tuples to nonzero coefficients.
Two coefficient fields are supported:

* ``QQ`` -- :class:`fractions.Fraction` coefficients, exact arithmetic;
* ``CC`` -- Python ``complex`` (53 bits) or :class:`mpmath.mpc` when a higher
  working precision is requested.

Only non-negative exponents are represented.  Points with a vanishing
coordinate are removed by saturation, never by Laurent inversion.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import mpmath

QQ = "QQ"
CC = "CC"

Exponent = tuple[int, ...]


class RingMismatchError(ValueError):
    """Raised when polynomials from different rings are combined."""


class PolynomialSyntaxError(ValueError):
    """Raised by :func:`parse` on malformed input; carries the offending offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownVariableError(PolynomialSyntaxError):
    pass


@dataclass(frozen=True)
class VariableRing:
    """Ordered variable names plus a coefficient field tag."""

    names: tuple[str, ...]
    field: str = QQ
    precision: int = 53

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise ValueError("a ring needs at least one variable")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate variable names in {self.names}")
        for name in self.names:
            if not _IDENT.fullmatch(name):
                raise ValueError(f"invalid variable name {name!r}")
        if self.field not in (QQ, CC):
            raise ValueError(f"unknown field {self.field!r}")
        if self.precision < 53:
            raise ValueError("precision must be at least 53 bits")

    @property
    def nvars(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is not a variable of {self.names}") from None

    def coerce(self, value):
        """Convert a scalar into this ring's coefficient type."""
        if self.field == QQ:
            if isinstance(value, Fraction):
                return value
            if isinstance(value, (int, str)):
                return Fraction(value)
            if isinstance(value, float):
                return Fraction(value)
            if isinstance(value, complex):
                if value.imag:
                    raise TypeError("complex value in an exact rational ring")
                return Fraction(value.real)
            raise TypeError(f"cannot coerce {value!r} to QQ")
        if self.precision > 53:
            with mpmath.workprec(self.precision):
                if isinstance(value, Fraction):
                    return mpmath.mpc(mpmath.mpf(value.numerator) / value.denominator)
                return mpmath.mpc(value)
        if isinstance(value, Fraction):
            return complex(value.numerator / value.denominator)
        return complex(value)

    def zero(self) -> "Polynomial":
        return Polynomial(self, {})

    def one(self) -> "Polynomial":
        return self.constant(1)

    def constant(self, value) -> "Polynomial":
        c = self.coerce(value)
        return Polynomial(self, {(0,) * self.nvars: c} if c != 0 else {})

    def var(self, name_or_index) -> "Polynomial":
        i = name_or_index if isinstance(name_or_index, int) else self.index(name_or_index)
        e = [0] * self.nvars
        e[i] = 1
        return Polynomial(self, {tuple(e): self.coerce(1)})

    def gens(self) -> list["Polynomial"]:
        return [self.var(i) for i in range(self.nvars)]

    def with_field(self, field: str, precision: int = 53) -> "VariableRing":
        return VariableRing(self.names, field, precision)


def grevlex_key(e: Exponent):
    return (sum(e), tuple(-a for a in reversed(e)))


class Polynomial:
    """Immutable sparse polynomial; ``terms`` maps exponents to nonzero coefficients."""

    __slots__ = ("ring", "_terms", "_hash")

    def __init__(self, ring: VariableRing, terms: Mapping[Exponent, object], *, _trusted=False):
        self.ring = ring
        if _trusted:
            self._terms = terms
        else:
            n = ring.nvars
            clean = {}
            for e, c in terms.items():
                e = tuple(int(a) for a in e)
                if len(e) != n or any(a < 0 for a in e):
                    raise ValueError(f"bad exponent {e} for ring with {n} variables")
                c = ring.coerce(c)
                if c != 0:
                    clean[e] = clean.get(e, 0) + c
                    if clean[e] == 0:
                        del clean[e]
            self._terms = clean
        self._hash = None

    @property
    def terms(self) -> Mapping[Exponent, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_term(self):
        return self._terms.get((0,) * self.ring.nvars, self.ring.coerce(0))

    def total_degree(self) -> int:
        """Largest total degree of a term; -1 for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def degree_in(self, indices: Iterable[int]) -> int:
        idx = list(indices)
        return max((sum(e[i] for i in idx) for e in self._terms), default=-1)

    def variables(self) -> set[int]:
        return {i for e in self._terms for i, a in enumerate(e) if a}

    def sorted_terms(self):
        """Terms in decreasing grevlex order."""
        return sorted(self._terms.items(), key=lambda t: grevlex_key(t[0]), reverse=True)

    # arithmetic ----------------------------------------------------------

    def _check(self, other: "Polynomial"):
        if self.ring != other.ring:
            raise RingMismatchError(f"ring mismatch: {self.ring.names} vs {other.ring.names}")

    def _lift(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        return self.ring.constant(other)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            v = out.get(e, 0) + c
            if v == 0:
                out.pop(e, None)
            else:
                out[e] = v
        return Polynomial(self.ring, out, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.ring, {e: -c for e, c in self._terms.items()}, _trusted=True)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = self.ring.coerce(other)
            if c == 0:
                return self.ring.zero()
            return Polynomial(self.ring, {e: v * c for e, v in self._terms.items()}, _trusted=True)
        self._check(other)
        out: dict = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = out.get(e, 0) + c1 * c2
                if v == 0:
                    out.pop(e, None)
                else:
                    out[e] = v
        return Polynomial(self.ring, out, _trusted=True)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result, base = self.ring.one(), self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            self._check(other)
            if not other.is_constant() or other.is_zero():
                raise ZeroDivisionError("division only by nonzero constants")
            other = other.constant_term()
        c = self.ring.coerce(other)
        if c == 0:
            raise ZeroDivisionError("division by zero")
        return Polynomial(self.ring, {e: v / c for e, v in self._terms.items()}, _trusted=True)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.ring == other.ring and self._terms == other._terms
        if isinstance(other, (int, Fraction, float, complex)):
            return self == self.ring.constant(other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ring, frozenset(self._terms.items())))
        return self._hash

    # calculus and evaluation ---------------------------------------------

    def partial(self, var: int) -> "Polynomial":
        """Formal partial derivative with respect to variable index ``var``."""
        if not 0 <= var < self.ring.nvars:
            raise IndexError(f"variable index {var} out of range")
        out = {}
        for e, c in self._terms.items():
            a = e[var]
            if a:
                d = list(e)
                d[var] = a - 1
                out[tuple(d)] = c * a
        return Polynomial(self.ring, out, _trusted=True)

    def evaluate(self, point: Sequence):
        """Value at ``point``; exact for QQ when the point is rational."""
        if len(point) != self.ring.nvars:
            raise ValueError(f"point has {len(point)} coordinates, ring has {self.ring.nvars}")
        if self.ring.field == QQ:
            pt = [p if isinstance(p, (complex, float)) else Fraction(p) for p in point]
            total = Fraction(0)
        else:
            pt = [self.ring.coerce(p) for p in point]
            total = self.ring.coerce(0)
        for e, c in self._terms.items():
            v = c
            for x, a in zip(pt, e):
                if a:
                    v = v * x**a
            total = total + v
        return total

    def substitute(self, values: Mapping[int, "Polynomial | object"]) -> "Polynomial":
        """Replace variables (by index) with polynomials or scalars of the same ring."""
        result = self.ring.zero()
        subs = {i: self._lift(v) for i, v in values.items()}
        for e, c in self._terms.items():
            keep = list(e)
            term = self.ring.one()
            for i, p in subs.items():
                if e[i]:
                    term = term * p ** e[i]
                    keep[i] = 0
            result = result + term * Polynomial(self.ring, {tuple(keep): c}, _trusted=True)
        return result

    def map_coefficients(self, ring: VariableRing, fn=None) -> "Polynomial":
        """Same exponents over a ring with the same variable count."""
        if ring.nvars != self.ring.nvars:
            raise RingMismatchError("variable counts differ")
        fn = fn or (lambda c: c)
        return Polynomial(ring, {e: fn(c) for e, c in self._terms.items()})

    def embed(self, ring: VariableRing) -> "Polynomial":
        """Move into ``ring`` by matching variable names."""
        pos = [ring.index(name) for name in self.ring.names]
        out = {}
        for e, c in self._terms.items():
            d = [0] * ring.nvars
            for i, a in zip(pos, e):
                d[i] = a
            out[tuple(d)] = c
        return Polynomial(ring, out)

    def homogenize(self, groups: Sequence[Sequence[int]], hom_vars: Sequence[int]) -> "Polynomial":
        """Multihomogenize: each group gets padded with its homogenizing variable.

        ``groups[g]`` lists variable indices of group ``g`` and ``hom_vars[g]`` is
        the index of its homogenizing variable (already present in the ring).
        Variables outside every group are treated as degree zero.
        """
        degs = [self.degree_in(g) for g in groups]
        out = {}
        for e, c in self._terms.items():
            d = list(e)
            for g, h, D in zip(groups, hom_vars, degs):
                d[h] += D - sum(e[i] for i in g)
            out[tuple(d)] = c
        return Polynomial(self.ring, out, _trusted=True)

    # printing --------------------------------------------------------------

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                name if a == 1 else f"{name}^{a}" for name, a in zip(self.ring.names, e) if a
            )
            neg, coeff = _format_coeff(c)
            if mono:
                body = mono if coeff == "1" else f"{coeff}*{mono}"
            else:
                body = coeff
            parts.append(("-" if neg else "+", body))
        sign, body = parts[0]
        out = ("-" if sign == "-" else "") + body
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"Polynomial({str(self)!r}, {self.ring.names})"


def _format_coeff(c):
    if isinstance(c, Fraction):
        return c < 0, str(abs(c))
    if isinstance(c, complex) and c.imag == 0:
        return c.real < 0, repr(abs(c.real))
    return False, f"({c})"


# jacobians and minors ------------------------------------------------------


def jacobian(polys: Sequence[Polynomial], variables: Sequence[int] | None = None) -> list[list[Polynomial]]:
    """Rows are polynomials, columns are the selected variable indices."""
    if not polys:
        raise ValueError("jacobian of an empty system")
    ring = polys[0].ring
    for p in polys:
        if p.ring != ring:
            raise RingMismatchError("jacobian needs a common ring")
    cols = range(ring.nvars) if variables is None else variables
    return [[p.partial(j) for j in cols] for p in polys]


def determinant(m: Sequence[Sequence[Polynomial]]) -> Polynomial:
    size = len(m)
    if any(len(row) != size for row in m):
        raise ValueError("determinant of a non-square matrix")
    return _minor_table(m, size)[(tuple(range(size)), tuple(range(size)))]


def minors(m: Sequence[Sequence[Polynomial]], size: int) -> list[Polynomial]:
    """All size-by-size minors, rows and columns in lexicographic subset order.

    Sub-determinants are shared between minors through a table keyed by
    (row subset, column subset) and built by Laplace expansion along the
    first chosen row.
    """
    nrows = len(m)
    ncols = len(m[0]) if nrows else 0
    if size < 1 or size > min(nrows, ncols):
        raise ValueError(f"minor size {size} out of range for a {nrows}x{ncols} matrix")
    table = _minor_table(m, size)
    return [
        table[(rows, cols)]
        for rows in combinations(range(nrows), size)
        for cols in combinations(range(ncols), size)
    ]


def _minor_table(m, size):
    nrows = len(m)
    ncols = len(m[0])
    table = {}
    for r in range(nrows):
        for c in range(ncols):
            table[((r,), (c,))] = m[r][c]
    # a size-s minor on rows R only needs (s-1)-minors on the trailing rows of R
    for s in range(2, size + 1):
        for rows in combinations(range(nrows), s):
            head, tail = rows[0], rows[1:]
            for cols in combinations(range(ncols), s):
                acc = m[0][0].ring.zero()
                for j, c in enumerate(cols):
                    entry = m[head][c]
                    if entry.is_zero():
                        continue
                    sub = table[(tail, cols[:j] + cols[j + 1:])]
                    if sub.is_zero():
                        continue
                    acc = acc - entry * sub if j % 2 else acc + entry * sub
                table[(rows, cols)] = acc
    return table


# parsing --------------------------------------------------------------------

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise PolynomialSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        tokens.append((kind, "^" if value == "**" else value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, ring: VariableRing):
        self.text = text
        self.ring = ring
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, msg, pos=None):
        raise PolynomialSyntaxError(msg, self.peek()[2] if pos is None else pos, self.text)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            self.fail("empty expression")
        p = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return p

    def expr(self):
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            q = self.unary()
            if op == "*":
                p = p * q
            else:
                if not q.is_constant() or q.is_zero():
                    raise PolynomialSyntaxError("division only by a nonzero constant", pos, self.text)
                p = p / q
        return p

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("+", "-"):
            self.take()
            p = self.unary()
            return -p if tok[1] == "-" else p
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, value, pos = self.take()
            if kind != "num" or not value.isdigit():
                raise PolynomialSyntaxError("exponent must be a non-negative integer literal", pos, self.text)
            return base ** int(value)
        return base

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            if self.ring.field == QQ:
                return self.ring.constant(Fraction(value))
            return self.ring.constant(value if self.ring.precision > 53 else float(value))
        if kind == "name":
            if value not in self.ring.names:
                raise UnknownVariableError(f"unknown variable {value!r}", pos, self.text)
            return self.ring.var(value)
        if kind == "op" and value == "(":
            p = self.expr()
            if self.peek()[1] != ")":
                self.fail("expected ')'")
            self.take()
            return p
        if kind == "end":
            raise PolynomialSyntaxError("unexpected end of input", pos, self.text)
        raise PolynomialSyntaxError(f"unexpected token {value!r}", pos, self.text)


def parse(text: str, ring: VariableRing) -> Polynomial:
    """Parse ``text`` (operators ``+ - * / ^``, parentheses, numeric literals)."""
    return _Parser(text, ring).parse()

