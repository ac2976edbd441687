"""Exact Groebner bases over the rationals.

Buchberger's algorithm with the sugar selection strategy and the
Gebauer-Moeller installation of the coprime and chain criteria.  Polynomials
are stored monic with GMP rational coefficients while reducing and
handed back integer-primitive (content free), then made monic over QQ.

Monomials are packed into single Python integers whose natural order is the
monomial order.  Each packed integer is a row of 16-bit fields, one per
row of the order's weight matrix, offset so that the product of monomials is
integer addition (minus the packed unit) and divisibility is a mask test on
the top bit of every field.
"""

from __future__ import annotations

import heapq
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from gmpy2 import gcd, lcm, mpq, mpz
from typing import Sequence

from .ring import QQ, Polynomial, RingMismatchError, VariableRing

log = logging.getLogger(__name__)

_W = 16
_POS = 1 << (_W - 1)
_NEG = (1 << (_W - 1)) - 1

DEFAULT_MAX_BASIS = 20_000
DEFAULT_MAX_DEGREE = 60


class ResourceCapExceeded(RuntimeError):
    """The basis outgrew the configured size or degree cap."""


class NotZeroDimensional(ValueError):
    pass


@dataclass(frozen=True)
class MonomialOrder:
    """``grevlex``, ``lex`` or ``block``; block orders compare the first ``block`` variables by grevlex, then the rest."""

    kind: str = "grevlex"
    block: int = 0

    def __post_init__(self):
        if self.kind not in ("grevlex", "lex", "block"):
            raise ValueError(f"unknown monomial order {self.kind!r}")
        if self.kind == "block" and self.block < 1:
            raise ValueError("block order needs a positive prefix size")


GREVLEX = MonomialOrder("grevlex")
LEX = MonomialOrder("lex")


def block_order(prefix: int) -> MonomialOrder:
    return MonomialOrder("block", prefix)


class _Packer:
    """Packs exponent tuples for one (order, nvars) pair."""

    def __init__(self, order: MonomialOrder, nvars: int):
        if order.kind == "block" and order.block > nvars:
            raise ValueError("block prefix larger than the number of variables")
        # fields: (sign, variable indices summed), most significant first
        fields: list[tuple[int, tuple[int, ...]]] = []
        if order.kind == "lex":
            fields = [(1, (i,)) for i in range(nvars)]
        else:
            blocks = [range(nvars)] if order.kind == "grevlex" else [range(order.block), range(order.block, nvars)]
            for blk in blocks:
                blk = list(blk)
                if not blk:
                    continue
                fields.append((1, tuple(blk)))
                fields.extend((-1, (i,)) for i in reversed(blk))
        self.nvars = nvars
        self.fields = fields
        nf = len(fields)
        self.shifts = [_W * (nf - 1 - f) for f in range(nf)]
        self.pos_mask = 0
        self.neg_mask = 0
        self.var_field = {}
        for f, ((sign, idx), sh) in enumerate(zip(fields, self.shifts)):
            if sign > 0:
                self.pos_mask |= 1 << (sh + _W - 1)
            else:
                self.neg_mask |= 1 << (sh + _W - 1)
            if len(idx) == 1:
                self.var_field[idx[0]] = (sign, sh)
        self.one = self.pack((0,) * nvars)
        self._unpack_cache: dict[int, tuple[int, ...]] = {}

    def pack(self, e) -> int:
        k = 0
        for (sign, idx), sh in zip(self.fields, self.shifts):
            d = sum(e[i] for i in idx)
            k |= ((_POS + d) if sign > 0 else (_NEG - d)) << sh
        return k

    def unpack(self, k: int) -> tuple[int, ...]:
        e = self._unpack_cache.get(k)
        if e is None:
            mask = (1 << _W) - 1
            out = []
            for i in range(self.nvars):
                sign, sh = self.var_field[i]
                v = (k >> sh) & mask
                out.append(v - _POS if sign > 0 else _NEG - v)
            e = tuple(out)
            self._unpack_cache[k] = e
        return e

    def divides(self, a: int, b: int) -> bool:
        """True when monomial ``a`` divides monomial ``b``."""
        d = b - a + self.one
        return (d & self.pos_mask) == self.pos_mask and not (d & self.neg_mask)

    def lcm(self, a: int, b: int) -> int:
        return self.pack(tuple(map(max, self.unpack(a), self.unpack(b))))

    def degree(self, k: int) -> int:
        return sum(self.unpack(k))

    def coprime(self, a: int, b: int) -> bool:
        return not any(x and y for x, y in zip(self.unpack(a), self.unpack(b)))


class _Poly:
    """Monic polynomial with ``mpq`` coefficients; ``terms`` sorted by decreasing monomial."""

    __slots__ = ("terms", "lm", "sugar")

    def __init__(self, coeffs: dict, sugar: int):
        items = sorted(coeffs.items(), reverse=True)
        lc = items[0][1]
        if lc != 1:
            inv = 1 / mpq(lc)
            items = [(k, c * inv) for k, c in items]
        self.terms = items
        self.lm = items[0][0]
        self.sugar = sugar

    def primitive(self) -> list[tuple[int, int]]:
        """Terms scaled to coprime integers with a positive leading coefficient."""
        den = mpz(1)
        for _, c in self.terms:
            den = lcm(den, c.denominator)
        ints = [(k, c * den) for k, c in self.terms]
        g = mpz(0)
        for _, c in ints:
            g = gcd(g, c.numerator)
        return [(k, int(c.numerator // g)) for k, c in ints]


def _to_mpq(p: Polynomial, packer: _Packer) -> dict:
    return {packer.pack(e): mpq(c.numerator, c.denominator) for e, c in p.items()}


def _reduce(coeffs: dict, basis: list[_Poly], packer: _Packer) -> dict:
    """Full remainder of division by the monic ``basis`` (largest terms first)."""
    f = dict(coeffs)
    rem: dict = {}
    heap = [-k for k in f]
    heapq.heapify(heap)
    one = packer.one
    pos_mask, neg_mask = packer.pos_mask, packer.neg_mask
    while heap:
        k = -heapq.heappop(heap)
        c = f.pop(k, None)
        if c is None:
            continue
        reducer = None
        for g in basis:
            d = k - g.lm + one
            if (d & pos_mask) == pos_mask and not (d & neg_mask):
                reducer = g
                break
        if reducer is None:
            rem[k] = c
            continue
        shift = k - reducer.lm
        for kg, cg in reducer.terms[1:]:
            kk = kg + shift
            v = f.get(kk)
            if v is None:
                f[kk] = -c * cg
                heapq.heappush(heap, -kk)
            else:
                v -= c * cg
                if v:
                    f[kk] = v
                else:
                    del f[kk]
    return rem


@dataclass(frozen=True)
class GroebnerBasis:
    """A Groebner basis; ``reduced`` bases have monic elements in decreasing leading-monomial order."""

    generators: tuple[Polynomial, ...]
    order: MonomialOrder
    reduced: bool
    ring: VariableRing

    def __len__(self):
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    @property
    def is_unit_ideal(self) -> bool:
        return any(g.is_constant() for g in self.generators)

    def leading_exponents(self) -> list[tuple[int, ...]]:
        packer = _packer(self.order, self.ring.nvars)
        return [packer.unpack(max(packer.pack(e) for e, _ in g.items())) for g in self.generators]


_PACKERS: dict[tuple[MonomialOrder, int], _Packer] = {}


def _packer(order: MonomialOrder, nvars: int) -> _Packer:
    key = (order, nvars)
    if key not in _PACKERS:
        _PACKERS[key] = _Packer(order, nvars)
    return _PACKERS[key]


def _common_ring(gens: Sequence[Polynomial]) -> VariableRing:
    ring = gens[0].ring
    for g in gens:
        if g.ring != ring:
            raise RingMismatchError("generators live in different rings")
    if ring.field != QQ:
        raise ValueError("Groebner bases are computed over the exact rational field only")
    return ring


def _from_internal(p: _Poly, ring: VariableRing, packer: _Packer) -> Polynomial:
    return Polynomial(
        ring, {packer.unpack(k): Fraction(int(c.numerator), int(c.denominator)) for k, c in p.terms}, _trusted=True
    )


def _spoly(gi: _Poly, gj: _Poly, l: int) -> dict:
    s: dict = {}
    si, sj = l - gi.lm, l - gj.lm
    for k, c in gi.terms[1:]:
        s[k + si] = c
    for k, c in gj.terms[1:]:
        kk = k + sj
        v = s.get(kk, 0) - c
        if v:
            s[kk] = v
        else:
            s.pop(kk, None)
    return s


def buchberger(
    gens: Sequence[Polynomial],
    order: MonomialOrder = GREVLEX,
    *,
    max_basis: int = DEFAULT_MAX_BASIS,
    max_degree: int = DEFAULT_MAX_DEGREE,
    ring: VariableRing | None = None,
    strategy: str | None = None,
) -> GroebnerBasis:
    """Reduced Groebner basis of the ideal generated by ``gens``.

    ``strategy`` picks the next critical pair: ``"sugar"`` (smallest sugar
    degree, ties by lcm) or ``"normal"`` (smallest lcm in the monomial order).
    The default is sugar for graded orders and normal for elimination orders,
    where sugar degrees say little about the order and stall on saturations.

    Raises :class:`ResourceCapExceeded` once the working basis holds more than
    ``max_basis`` elements or a new element exceeds total degree ``max_degree``.
    """
    if not gens and ring is None:
        raise ValueError("buchberger needs at least one generator or an explicit ring")
    ring = ring or _common_ring(gens)
    if gens:
        _common_ring(gens)
    if strategy is None:
        strategy = "sugar" if order.kind == "grevlex" else "normal"
    if strategy not in ("sugar", "normal"):
        raise ValueError(f"unknown selection strategy {strategy!r}")
    use_sugar = strategy == "sugar"
    packer = _packer(order, ring.nvars)
    polys = [_Poly(_to_mpq(g, packer), g.total_degree()) for g in gens if not g.is_zero()]
    if not polys:
        return GroebnerBasis((), order, True, ring)

    basis: list[_Poly] = []
    active: list[bool] = []
    pairs: list[tuple[int, int, int, int]] = []  # (sugar, lcm, i, j)
    degree = packer.degree

    def update(h_idx: int):
        h = basis[h_idx]
        lm_h = h.lm
        cands = [i for i in range(h_idx) if active[i]]
        lcms = {i: packer.lcm(basis[i].lm, lm_h) for i in cands}
        # chain criterion among the new pairs; equal lcms keep one representative
        kept = []
        for i in cands:
            li = lcms[i]
            if packer.coprime(basis[i].lm, lm_h):
                kept.append(i)
                continue
            if not any(
                j != i and packer.divides(lcms[j], li) and (lcms[j] != li or j < i) for j in cands
            ):
                kept.append(i)
        new_pairs = [i for i in kept if not packer.coprime(basis[i].lm, lm_h)]
        # chain criterion on the pending pairs
        survivors = [
            (s, l, i, j)
            for s, l, i, j in pairs
            if not (
                packer.divides(lm_h, l)
                and packer.lcm(basis[i].lm, lm_h) != l
                and packer.lcm(basis[j].lm, lm_h) != l
            )
        ]
        for i in new_pairs:
            l = lcms[i]
            dl = degree(l)
            sugar = max(basis[i].sugar + dl - degree(basis[i].lm), h.sugar + dl - degree(lm_h))
            survivors.append((sugar if use_sugar else 0, l, i, h_idx))
        heapq.heapify(survivors)
        pairs[:] = survivors
        for i in cands:
            if packer.divides(lm_h, basis[i].lm):
                active[i] = False

    def add(p: _Poly):
        if degree(p.lm) > max_degree:
            raise ResourceCapExceeded(f"basis element of degree {degree(p.lm)} exceeds cap {max_degree}")
        if len(basis) >= max_basis:
            raise ResourceCapExceeded(f"basis size exceeds cap {max_basis}")
        basis.append(p)
        active.append(True)
        update(len(basis) - 1)

    for p in sorted(polys, key=lambda q: q.lm):
        reducers = [basis[i] for i in range(len(basis)) if active[i]]
        rem = _reduce(dict(p.terms), reducers, packer)
        if rem:
            q = _Poly(rem, p.sugar)
            if degree(q.lm) == 0:
                return _unit(ring, order)
            add(q)

    while pairs:
        _, l, i, j = heapq.heappop(pairs)
        sugar = max(basis[i].sugar + degree(l) - degree(basis[i].lm), basis[j].sugar + degree(l) - degree(basis[j].lm))
        s = _spoly(basis[i], basis[j], l)
        if not s:
            continue
        reducers = sorted((basis[t] for t in range(len(basis)) if active[t]), key=lambda g: g.lm)
        rem = _reduce(s, reducers, packer)
        if not rem:
            continue
        q = _Poly(rem, sugar)
        if degree(q.lm) == 0:
            return _unit(ring, order)
        add(q)
        if len(basis) % 100 == 0:
            log.debug("basis %d elements, %d pairs pending, sugar %d", len(basis), len(pairs), sugar)

    final = [basis[t] for t in range(len(basis)) if active[t]]
    return _interreduce(final, packer, ring, order)


_RECORDERS: list[list[GroebnerBasis]] = []


@contextmanager
def recording():
    """Collect every basis that :func:`buchberger` returns inside the block."""
    seen: list[GroebnerBasis] = []
    _RECORDERS.append(seen)
    try:
        yield seen
    finally:
        _RECORDERS.remove(seen)


def _emit(gb: GroebnerBasis) -> GroebnerBasis:
    for seen in _RECORDERS:
        seen.append(gb)
    return gb


def _unit(ring: VariableRing, order: MonomialOrder) -> GroebnerBasis:
    return _emit(GroebnerBasis((ring.one(),), order, True, ring))


def _interreduce(polys: list[_Poly], packer: _Packer, ring, order) -> GroebnerBasis:
    polys = sorted(polys, key=lambda p: p.lm)
    minimal: list[_Poly] = []
    for p in polys:
        if not any(packer.divides(q.lm, p.lm) for q in minimal):
            minimal.append(p)
    reduced = []
    for i, p in enumerate(minimal):
        others = minimal[:i] + minimal[i + 1:]
        tail = _reduce(dict(p.terms[1:]), others, packer)
        tail[p.lm] = mpq(1)
        reduced.append(_Poly(tail, p.sugar))
    reduced.sort(key=lambda p: p.lm, reverse=True)
    return _emit(GroebnerBasis(tuple(_from_internal(p, ring, packer) for p in reduced), order, True, ring))


def _internal_basis(gb: GroebnerBasis) -> tuple[_Packer, list[_Poly]]:
    packer = _packer(gb.order, gb.ring.nvars)
    return packer, [_Poly(_to_mpq(g, packer), 0) for g in gb.generators]


def normal_form(p: Polynomial, gb: GroebnerBasis) -> Polynomial:
    """Remainder of ``p`` on division by ``gb``; zero exactly when ``p`` is in the ideal."""
    if p.ring != gb.ring:
        raise RingMismatchError("polynomial and basis live in different rings")
    if p.is_zero():
        return p
    packer, basis = _internal_basis(gb)
    rem = _reduce(_to_mpq(p, packer), basis, packer)
    return Polynomial(
        p.ring, {packer.unpack(k): Fraction(int(c.numerator), int(c.denominator)) for k, c in rem.items()}, _trusted=True
    )


def is_groebner(gb: GroebnerBasis) -> bool:
    """Check Buchberger's criterion: every S-polynomial reduces to zero."""
    if not gb.generators:
        return True
    packer, basis = _internal_basis(gb)
    for gi, gj in combinations(basis, 2):
        s = _spoly(gi, gj, packer.lcm(gi.lm, gj.lm))
        if s and _reduce(s, basis, packer):
            return False
    return True


def contains(gb: GroebnerBasis, p: Polynomial) -> bool:
    return normal_form(p, gb).is_zero()


# elimination and saturation -------------------------------------------------


def _fresh_name(ring: VariableRing, stem: str = "t") -> str:
    i = 0
    while f"_{stem}{i}" in ring.names:
        i += 1
    return f"_{stem}{i}"


def eliminate(gens: Sequence[Polynomial], first_vars: int, **caps) -> list[Polynomial]:
    """Generators of the ideal intersected with the subring of the variables after the first ``first_vars``.

    Uses a block order; the result is the reduced grevlex basis of the
    elimination ideal, returned in the original ring.
    """
    gens = [g for g in gens if not g.is_zero()]
    if not gens:
        return []
    ring = _common_ring(gens)
    if first_vars == 0:
        return list(buchberger(gens, GREVLEX, **caps).generators)
    if not 0 < first_vars < ring.nvars:
        raise ValueError("must eliminate a proper nonempty prefix of the variables")
    gb = buchberger(gens, block_order(first_vars), **caps)
    return [g for g in gb.generators if not any(i < first_vars for i in g.variables())]


def _with_prefix(gens: Sequence[Polynomial], ring: VariableRing):
    t_name = _fresh_name(ring)
    big = VariableRing((t_name,) + ring.names, QQ)
    return big, [g.embed(big) for g in gens]


def _drop_prefix(polys: Sequence[Polynomial], ring: VariableRing) -> list[Polynomial]:
    return [Polynomial(ring, {e[1:]: c for e, c in p.items()}, _trusted=True) for p in polys]


def saturate_by_poly(gens: Sequence[Polynomial], g: Polynomial, **caps) -> list[Polynomial]:
    """Generators of ``I : g^oo`` via ``t*g - 1`` and elimination of ``t``."""
    if g.is_zero():
        raise ValueError("cannot saturate by the zero polynomial")
    gens = [p for p in gens if not p.is_zero()]
    if not gens:
        return []
    ring = _common_ring(list(gens) + [g])
    big, lifted = _with_prefix(list(gens) + [g], ring)
    t = big.var(0)
    *lifted_gens, lifted_g = lifted
    elim = eliminate(lifted_gens + [t * lifted_g - 1], 1, **caps)
    return _drop_prefix(elim, ring)


def intersect(a: Sequence[Polynomial], b: Sequence[Polynomial], **caps) -> list[Polynomial]:
    """Generators of the intersection, from ``t*A + (1-t)*B`` eliminating ``t``."""
    a = [p for p in a if not p.is_zero()]
    b = [p for p in b if not p.is_zero()]
    if not a or not b:
        return []
    ring = _common_ring(a + b)
    big, lifted = _with_prefix(a + b, ring)
    t = big.var(0)
    mixed = [t * p for p in lifted[: len(a)]] + [(1 - t) * p for p in lifted[len(a):]]
    return _drop_prefix(eliminate(mixed, 1, **caps), ring)


def saturate_by_ideal(gens: Sequence[Polynomial], J: Sequence[Polynomial], **caps) -> list[Polynomial]:
    """``I : J^oo`` as the intersection of the saturations by each generator of ``J``."""
    J = [g for g in J if not g.is_zero()]
    if not J:
        raise ValueError("saturating ideal has no nonzero generators")
    result = None
    for g in J:
        sat = saturate_by_poly(gens, g, **caps)
        result = sat if result is None else intersect(result, sat, **caps)
        if not result:
            break
    return result


# dimension and degree --------------------------------------------------------


def dimension(gb: GroebnerBasis) -> int:
    """Krull dimension; -1 for the unit ideal."""
    if gb.is_unit_ideal:
        return -1
    n = gb.ring.nvars
    supports = [frozenset(i for i, a in enumerate(e) if a) for e in gb.leading_exponents()]
    for size in range(n, -1, -1):
        for subset in combinations(range(n), size):
            s = set(subset)
            if not any(sup <= s for sup in supports):
                return size
    return 0


def standard_monomials(gb: GroebnerBasis) -> list[tuple[int, ...]]:
    """Monomials outside the leading-term ideal; requires a zero-dimensional ideal."""
    if gb.is_unit_ideal:
        return []
    n = gb.ring.nvars
    lead = gb.leading_exponents()
    bounds = []
    for i in range(n):
        pure = [e[i] for e in lead if e[i] and all(a == 0 for j, a in enumerate(e) if j != i)]
        if not pure:
            raise NotZeroDimensional(f"no pure power of {gb.ring.names[i]} among the leading terms")
        bounds.append(min(pure))

    def divisible(m):
        return any(all(a >= b for a, b in zip(m, e)) for e in lead)

    out = []

    def walk(i, prefix):
        if i == n:
            out.append(tuple(prefix))
            return
        for a in range(bounds[i]):
            prefix.append(a)
            # once a prefix is divisible every extension is too
            partial = tuple(prefix) + (0,) * (n - i - 1)
            if divisible(partial):
                prefix.pop()
                break
            walk(i + 1, prefix)
            prefix.pop()

    walk(0, [])
    return out


def zero_dim_degree(gb: GroebnerBasis) -> int:
    """Vector-space dimension of the quotient ring (0 for the unit ideal)."""
    return len(standard_monomials(gb))
