"""Polynomial systems for ML degrees: likelihood ideals, removal varieties, Lagrange systems.

A variety is described by generators of its ideal in the coordinates
``z_1..z_n``; optional parameter variables (the right-hand sides ``b`` of the
slicing hyperplanes) may live in the same ring and are never differentiated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import groebner
from .ring import CC, QQ, Polynomial, VariableRing, jacobian, minors

log = logging.getLogger(__name__)

RANDOM_LOW, RANDOM_HIGH = 1, 30102
MAX_RESAMPLES = 3


@dataclass(frozen=True)
class VarietySpec:
    """Generators of an affine variety plus its dimension.

    ``coords`` are the indices of coordinate variables; every other ring
    variable is a parameter.
    """

    ring: VariableRing
    generators: tuple[Polynomial, ...]
    dim: int
    coords: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.coords:
            object.__setattr__(self, "coords", tuple(range(self.ring.nvars)))
        for g in self.generators:
            if g.ring != self.ring:
                raise ValueError("generator outside the variety's ring")
        if not 0 <= self.dim <= self.n:
            raise ValueError(f"dimension {self.dim} outside [0, {self.n}]")

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def codim(self) -> int:
        return self.n - self.dim

    @property
    def params(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.ring.nvars) if i not in self.coords)

    @classmethod
    def from_strings(cls, names: Sequence[str], gens: Sequence[str], dim: int | None = None) -> "VarietySpec":
        from .ring import parse

        ring = VariableRing(tuple(names), QQ)
        polys = tuple(parse(g, ring) for g in gens)
        if dim is None:
            dim = variety_dimension(polys, ring)
        return cls(ring, polys, dim)

    def to_field(self, field: str) -> "VarietySpec":
        if field == self.ring.field:
            return self
        ring = self.ring.with_field(field)
        return VarietySpec(ring, tuple(g.map_coefficients(ring) for g in self.generators), self.dim, self.coords)


def variety_dimension(gens: Sequence[Polynomial], ring: VariableRing) -> int:
    nonzero = [g for g in gens if not g.is_zero()]
    if not nonzero:
        return ring.nvars
    d = groebner.dimension(groebner.buchberger(nonzero, ring=ring))
    if d < 0:
        raise ValueError("the generators define the empty variety")
    return d


@dataclass(frozen=True)
class RemovalConfig:
    """Removal level ``k``, slicing matrix ``gamma`` (k x n), right-hand side ``b`` and the point.

    ``b=None`` keeps the right-hand sides as symbolic parameters.
    """

    k: int
    gamma: tuple[tuple, ...]
    b: tuple | None
    point: tuple

    @classmethod
    def through_point(cls, k: int, gamma, point) -> "RemovalConfig":
        """Hyperplanes through ``point``: ``b = gamma @ point``."""
        gamma = tuple(tuple(row) for row in gamma)
        b = tuple(sum((g * p for g, p in zip(row, point)), start=0) for row in gamma)
        return cls(k, gamma, b, tuple(point))


@dataclass
class RandomSource:
    """Seeded source of generic data.

    ``kind="exact"`` draws integers uniformly from ``[1, 30102]``;
    ``kind="numeric"`` draws unit-modulus complex numbers.
    """

    seed: int = 0
    kind: str = "exact"
    low: int = RANDOM_LOW
    high: int = RANDOM_HIGH
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("exact", "numeric"):
            raise ValueError(f"unknown random source kind {self.kind!r}")
        self.rng = np.random.default_rng(self.seed)

    def values(self, count: int) -> list:
        if self.kind == "exact":
            return [Fraction(int(v)) for v in self.rng.integers(self.low, self.high, size=count, endpoint=True)]
        return [complex(v) for v in np.exp(2j * np.pi * self.rng.random(count))]

    def value(self):
        return self.values(1)[0]


def sample_data(n: int, k: int, source: RandomSource) -> tuple:
    """Generic weights for the log-likelihood: ``n`` entries at k = 0, ``n + 1`` otherwise."""
    return tuple(source.values(n if k == 0 else n + 1))


def sample_gamma(k: int, n: int, source: RandomSource) -> tuple[tuple, ...]:
    """A ``k x n`` matrix with linearly independent rows."""
    if k > n:
        raise ValueError(f"cannot pick {k} independent hyperplanes in {n} dimensions")
    for _ in range(100):
        rows = tuple(tuple(source.values(n)) for _ in range(k))
        if k == 0 or np.linalg.matrix_rank(np.array(rows, dtype=complex)) == k:
            return rows
    raise RuntimeError("failed to sample independent hyperplanes")


# singular locus and likelihood ideal ------------------------------------------


def singular_locus_ideal(X: VarietySpec) -> list[Polynomial]:
    """Generators together with the codim-sized minors of their Jacobian."""
    gens = [g for g in X.generators if not g.is_zero()]
    c = X.codim
    if c == 0 or not gens:
        return [X.ring.one()]
    jac = jacobian(gens, X.coords)
    if c > min(len(gens), X.n):
        return list(gens)
    return list(gens) + [m for m in minors(jac, c) if not m.is_zero()]


def likelihood_matrix(X: VarietySpec, mu: Sequence) -> list[list[Polynomial]]:
    """Rows ``(mu_1..mu_n)`` and ``(dF_i/dz_j * z_j)_j`` for each generator."""
    if len(mu) != X.n:
        raise ValueError(f"data vector has {len(mu)} entries, variety has {X.n} coordinates")
    ring = X.ring
    zs = [ring.var(j) for j in X.coords]
    top = [ring.constant(m) for m in mu]
    rows = [top]
    for g in X.generators:
        if g.is_zero():
            continue
        rows.append([g.partial(j) * z for j, z in zip(X.coords, zs)])
    return rows


def likelihood_ideal(X: VarietySpec, mu: Sequence, *, saturation: str = "generators", **caps) -> list[Polynomial]:
    """Generators of the likelihood ideal of the torus part of ``X``.

    The ideal of (codim + 1)-minors of :func:`likelihood_matrix` plus the
    generators, saturated by the singular locus and by ``z_1 * ... * z_n``.
    ``saturation="generators"`` saturates by the singular locus through its
    generators one at a time; ``"combination"`` uses a single random
    integer combination of them (equal with probability one).
    """
    if X.ring.field != QQ:
        raise ValueError("the symbolic likelihood ideal needs an exact rational ring")
    ring = X.ring
    gens = [g for g in X.generators if not g.is_zero()]
    mat = likelihood_matrix(X, mu)
    size = X.codim + 1
    mins = [m for m in minors(mat, size) if not m.is_zero()] if size <= min(len(mat), X.n) else []
    ideal = mins + gens
    if not ideal:
        return []
    if any(p.is_constant() for p in ideal):
        return [ring.one()]
    # coordinate hyperplanes first: they usually shrink the ideal the most
    zprod = ring.one()
    for j in X.coords:
        zprod = zprod * ring.var(j)
    ideal = groebner.saturate_by_poly(ideal, zprod, **caps)
    if _is_unit(ideal):
        return [ring.one()]
    # generators of X lie in the ideal already, so only the minors matter
    sing = [m for m in singular_locus_ideal(X) if m not in gens]
    if not sing or any(m.is_constant() for m in sing):
        return ideal
    if saturation == "combination" and len(sing) > 1:
        rng = np.random.default_rng(len(sing))
        combo = ring.zero()
        for m in sing:
            combo = combo + m * int(rng.integers(RANDOM_LOW, RANDOM_HIGH, endpoint=True))
        sing = [combo]
    ideal = groebner.saturate_by_ideal(ideal, sing, **caps)
    return ideal if not _is_unit(ideal) else [ring.one()]


def _is_unit(gens: Sequence[Polynomial]) -> bool:
    return any(g.is_constant() and not g.is_zero() for g in gens)


def ml_degree_symbolic(X: VarietySpec, mu: Sequence, **kwargs) -> int:
    """Degree of the likelihood ideal; raises NotZeroDimensional for non-generic data."""
    ideal = likelihood_ideal(X, mu, **kwargs)
    if not ideal:
        raise groebner.NotZeroDimensional("likelihood ideal is zero")
    caps = {k: v for k, v in kwargs.items() if k != "saturation"}
    gb = groebner.buchberger(ideal, groebner.GREVLEX, **caps)
    if gb.is_unit_ideal:
        return 0
    if groebner.dimension(gb) != 0:
        raise groebner.NotZeroDimensional("positive-dimensional critical locus")
    return groebner.zero_dim_degree(gb)


def ml_degree_symbolic_resampled(X: VarietySpec, source: RandomSource, k: int = 0, **kwargs) -> tuple[int, tuple]:
    """Retry with fresh data when the critical locus comes out positive dimensional."""
    last = None
    for _ in range(MAX_RESAMPLES):
        mu = tuple(source.values(X.n))
        try:
            return ml_degree_symbolic(X, mu, **kwargs), mu
        except groebner.NotZeroDimensional as exc:
            log.warning("non-generic data at k=%d, resampling: %s", k, exc)
            last = exc
    raise groebner.NotZeroDimensional(f"data stayed non-generic after {MAX_RESAMPLES} draws") from last


# removal varieties and Lagrange systems -----------------------------------------


def _fresh(names: Sequence[str], stem: str) -> str:
    if stem not in names:
        return stem
    i = 0
    while f"{stem}{i}" in names:
        i += 1
    return f"{stem}{i}"


def removal_variety(X: VarietySpec, cfg: RemovalConfig) -> VarietySpec:
    """The variety whose ML degree is the k-th removal ML degree.

    For ``k >= 1`` a coordinate ``y = H_1(x)`` is appended and the further
    hyperplanes ``H_2 .. H_k`` are imposed, where ``H = gamma x - b``.
    With ``cfg.b is None`` the ring also carries parameters ``b1..bk``.
    """
    k = cfg.k
    if not 0 <= k <= X.dim + 1:
        raise ValueError(f"removal level {k} outside [0, {X.dim + 1}]")
    if k == 0:
        return X
    if len(cfg.gamma) != k or any(len(row) != X.n for row in cfg.gamma):
        raise ValueError(f"slicing matrix must be {k} x {X.n}")
    if X.params:
        raise ValueError("removal of a variety that already carries parameters")
    names = list(X.ring.names)
    y = _fresh(names, "y")
    names.append(y)
    param_names = []
    if cfg.b is None:
        for i in range(k):
            param_names.append(_fresh(names, f"b{i + 1}"))
            names.append(param_names[-1])
    elif len(cfg.b) != k:
        raise ValueError(f"right-hand side must have {k} entries")
    ring = VariableRing(tuple(names), X.ring.field, X.ring.precision)
    xs = [ring.var(j) for j in range(X.n)]

    def H(i):
        h = ring.zero()
        for g, x in zip(cfg.gamma[i], xs):
            h = h + x * g
        rhs = ring.var(param_names[i]) if cfg.b is None else ring.constant(cfg.b[i])
        return h - rhs

    gens = [g.embed(ring) for g in X.generators if not g.is_zero()]
    gens.append(ring.var(y) - H(0))
    gens.extend(H(i) for i in range(1, k))
    return VarietySpec(ring, tuple(gens), X.dim - (k - 1), tuple(range(X.n + 1)))


@dataclass(frozen=True)
class RemovalSystem:
    """Square Lagrange likelihood system with the first multiplier fixed to one.

    Variable roles are index tuples into ``ring``: ``primal`` coordinates,
    ``multipliers`` (one per generator) and ``params``.
    """

    ring: VariableRing
    equations: tuple[Polynomial, ...]
    primal: tuple[int, ...]
    multipliers: tuple[int, ...]
    params: tuple[int, ...]
    k: int = 0

    def __post_init__(self):
        unknowns = len(self.primal) + len(self.multipliers)
        if len(self.equations) != unknowns:
            raise ValueError(f"system is not square: {len(self.equations)} equations, {unknowns} unknowns")

    @property
    def unknowns(self) -> tuple[int, ...]:
        return self.primal + self.multipliers

    @property
    def primal_count(self) -> int:
        return len(self.primal)

    @property
    def lagrange_count(self) -> int:
        return len(self.multipliers)

    @property
    def parameter_count(self) -> int:
        return len(self.params)

    def degrees(self) -> list[int]:
        return [eq.degree_in(self.unknowns) for eq in self.equations]

    def specialize(self, b: Sequence) -> "RemovalSystem":
        """Substitute concrete parameter values; parameters stay in the ring but vanish from the equations."""
        if len(b) != len(self.params):
            raise ValueError("wrong number of parameter values")
        subs = dict(zip(self.params, b))
        eqs = tuple(eq.substitute(subs) for eq in self.equations)
        return RemovalSystem(self.ring, eqs, self.primal, self.multipliers, (), self.k)


class NotCompleteIntersection(ValueError):
    pass


def lagrange_system(Z: VarietySpec, mu: Sequence, k: int = 0) -> RemovalSystem:
    """Equations ``F = 0`` and ``mu_j + sum_i lambda_i (dF_i/dz_j) z_j = 0``."""
    gens = [g for g in Z.generators if not g.is_zero()]
    if len(gens) != Z.codim:
        raise NotCompleteIntersection(
            f"{len(gens)} generators for codimension {Z.codim}; the Lagrange system needs a complete intersection"
        )
    if len(mu) != Z.n:
        raise ValueError(f"data vector has {len(mu)} entries, expected {Z.n}")
    names = list(Z.ring.names)
    lam_names = []
    for i in range(len(gens)):
        lam_names.append(_fresh(names, f"lam{i + 1}"))
        names.append(lam_names[-1])
    # multipliers sit between the coordinates and the parameters
    coord_names = [Z.ring.names[j] for j in Z.coords]
    param_names = [Z.ring.names[j] for j in Z.params]
    order = coord_names + lam_names + param_names
    ring = VariableRing(tuple(order), Z.ring.field, Z.ring.precision)
    F = [g.embed(ring) for g in gens]
    lams = [ring.var(name) for name in lam_names]
    rows = []
    for j, name in enumerate(coord_names):
        jj = ring.index(name)
        z = ring.var(jj)
        row = ring.constant(mu[j])
        for lam, f in zip(lams, F):
            row = row + lam * f.partial(jj) * z
        rows.append(row)
    n = len(coord_names)
    c = len(lam_names)
    return RemovalSystem(
        ring,
        tuple(F + rows),
        tuple(range(n)),
        tuple(range(n, n + c)),
        tuple(range(n + c, n + c + len(param_names))),
        k,
    )
