"""Numerical homotopy continuation.

Paths are tracked in batches: every array carries a leading path axis and
each path keeps its own time, step size and status.  The predictor is a
classical fourth-order Runge-Kutta step on the Davidenko equation
``Hz dz/dt = -Ht``; the corrector is Newton's method.  Tracking stops at a
small cutoff time and the endpoint is polished by Newton at ``t = 0``.

Systems are evaluated in projective coordinates (one or two variable
groups, each with a random affine patch) so paths heading to infinity stay
bounded.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .ring import Polynomial, VariableRing
from .systems import RemovalSystem

log = logging.getLogger(__name__)

CONVERGED = "converged"
DIVERGED = "diverged"
STALLED = "stalled"
FAILED = "failed"


@dataclass(frozen=True)
class TrackerSettings:
    initial_step: float = 0.05
    min_step: float = 1e-12
    max_step: float = 0.1
    newton_tol: float = 1e-9
    newton_iters: int = 3
    max_steps: int = 20_000
    endgame_start: float = 1e-6
    divergence_bound: float = 1e12
    polish_iters: int = 10
    residual_tol: float = 1e-8
    final_step_tol: float = 1e-10
    max_condition: float = 1e8
    zero_tol: float = 1e-6
    duplicate_tol: float = 1e-6
    max_failure_rate: float = 0.1
    max_correction: float = 0.1
    max_relative_step: float = 1.0
    endgame_fallback: tuple[float, ...] = (1e-9, 1e-12)
    min_runs: int = 2
    max_runs: int = 5

    def __post_init__(self):
        cutoffs = (self.endgame_start,) + tuple(self.endgame_fallback)
        if any(b <= 0 or b >= a for a, b in zip(cutoffs, cutoffs[1:])):
            raise ValueError("endgame fallback cutoffs must decrease from endgame_start")
        if not (1 <= self.min_runs <= self.max_runs):
            raise ValueError("need 1 <= min_runs <= max_runs")
        if not (0 < self.min_step < self.initial_step <= self.max_step):
            raise ValueError("need 0 < min_step < initial_step <= max_step")
        for name in ("newton_tol", "endgame_start", "divergence_bound", "residual_tol", "max_condition", "zero_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


# batch evaluation ------------------------------------------------------------------


class CompiledSystem:
    """Evaluates polynomials and their Jacobians at many points at once.

    ``unknowns`` and ``params`` are ring indices; values are passed as
    arrays of shape ``(batch, len(unknowns))`` and ``(batch, len(params))``.
    """

    def __init__(self, polys: Sequence[Polynomial], unknowns: Sequence[int], params: Sequence[int] = ()):
        if not polys:
            raise ValueError("empty system")
        ring = polys[0].ring
        self.ring = ring
        self.unknowns = tuple(unknowns)
        self.params = tuple(params)
        order = self.unknowns + self.params
        pos = {v: i for i, v in enumerate(order)}
        nv = len(order)
        self.m = len(polys)
        self.nu = len(self.unknowns)
        self.np_ = len(self.params)

        monos: dict[tuple[int, ...], int] = {}

        def mono(e):
            key = tuple(e[v] for v in order)
            if key not in monos:
                monos[key] = len(monos)
            return monos[key]

        f_entries, ju_entries, jp_entries = [], [], []
        for i, p in enumerate(polys):
            if p.ring != ring:
                raise ValueError("polynomials from different rings")
            for e, c in p.items():
                if any(a and v not in pos for v, a in enumerate(e)):
                    raise ValueError("polynomial uses a variable that is neither unknown nor parameter")
                c = complex(c)
                f_entries.append((i, mono(e), c))
                for v in order:
                    a = e[v]
                    if not a:
                        continue
                    d = list(e)
                    d[v] -= 1
                    col = mono(d)
                    if v in self.unknowns:
                        ju_entries.append((i * self.nu + pos[v], col, c * a))
                    else:
                        jp_entries.append((i * self.np_ + pos[v] - self.nu, col, c * a))
        M = len(monos)
        E = np.zeros((M, nv), dtype=np.int64)
        for key, idx in monos.items():
            E[idx] = key
        self.exponents = E
        self.powers = []
        for v in range(nv):
            for a in range(1, int(E[:, v].max(initial=0)) + 1):
                rows = np.nonzero(E[:, v] == a)[0]
                if rows.size:
                    self.powers.append((v, a, rows))

        def mat(entries, nrows):
            if not entries:
                return sp.csr_matrix((nrows, M), dtype=complex)
            r, c, val = zip(*entries)
            return sp.csr_matrix((np.array(val, dtype=complex), (r, c)), shape=(nrows, M))

        self.CF = mat(f_entries, self.m)
        self.CU = mat(ju_entries, self.m * self.nu)
        self.CP = mat(jp_entries, self.m * max(self.np_, 1))

    def _monomials(self, X: np.ndarray) -> np.ndarray:
        B = X.shape[0]
        mono = np.ones((self.exponents.shape[0], B), dtype=complex)
        cache = {}
        for v, a, rows in self.powers:
            key = (v, a)
            if key not in cache:
                cache[key] = X[:, v] ** a
            mono[rows] *= cache[key]
        return mono

    def evaluate(self, Z: np.ndarray, P: np.ndarray | None = None, jac_params: bool = False):
        """Return ``F (B, m)``, ``JU (B, m, nu)`` and, if asked, ``JP (B, m, np)``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        B = Z.shape[0]
        if self.np_:
            P = np.broadcast_to(np.asarray(P, dtype=complex), (B, self.np_))
            X = np.concatenate([Z, P], axis=1)
        else:
            X = Z
        mono = self._monomials(X)
        F = (self.CF @ mono).T
        JU = (self.CU @ mono).reshape(self.m, self.nu, B).transpose(2, 0, 1)
        if not jac_params:
            return F, JU
        JP = (self.CP @ mono).reshape(self.m, max(self.np_, 1), B).transpose(2, 0, 1)[:, :, : self.np_]
        return F, JU, JP


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched solve; singular members come back as NaN instead of aborting the batch."""
    try:
        return np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full(b.shape, np.nan, dtype=complex)
        for i in range(A.shape[0]):
            try:
                out[i] = np.linalg.solve(A[i], b[i])
            except np.linalg.LinAlgError:
                pass
        return out


# homotopies ------------------------------------------------------------------------


class Homotopy:
    """``H(z, t)`` with ``t`` running from 1 (start) to 0 (target)."""

    n: int

    def evaluate(self, Z: np.ndarray, t: np.ndarray):
        """Return ``(H, Hz, Ht)`` with shapes ``(B, n)``, ``(B, n, n)``, ``(B, n)``."""
        raise NotImplementedError

    def affine_norm(self, Z: np.ndarray) -> np.ndarray:
        return np.abs(Z).max(axis=1)

    def charts(self) -> list["Patch"]:
        return list(getattr(self, "patches", ()))

    def residual(self, Z: np.ndarray) -> np.ndarray:
        """Largest equation value at ``t = 0`` once each patched group has unit max-norm.

        Patch rows are left out, so the value does not depend on the chart.
        """
        charts = self.charts()
        W = np.array(Z, dtype=complex)
        for patch in charts:
            idx = list(patch.indices)
            s = np.abs(W[:, idx]).max(axis=1)
            W[:, idx] /= np.where(s > 0, s, 1)[:, None]
        H = self.evaluate(W, np.zeros(W.shape[0]))[0]
        return np.abs(H[:, : self.n - len(charts)]).max(axis=1)


class FunctionHomotopy(Homotopy):
    """Wraps a callable returning ``(H, Hz, Ht)`` for one point; for small experiments."""

    def __init__(self, fn: Callable, n: int):
        self.fn = fn
        self.n = n

    def evaluate(self, Z, t):
        B = Z.shape[0]
        H = np.empty((B, self.n), dtype=complex)
        Hz = np.empty((B, self.n, self.n), dtype=complex)
        Ht = np.empty((B, self.n), dtype=complex)
        for i in range(B):
            h, hz, ht = self.fn(Z[i], float(t[i]))
            H[i], Hz[i], Ht[i] = h, np.reshape(hz, (self.n, self.n)), ht
        return H, Hz, Ht


@dataclass(frozen=True)
class Patch:
    """Affine chart ``sum(coeffs * z[indices]) = 1`` for one projective group."""

    indices: tuple[int, ...]
    coeffs: tuple[complex, ...]

    def value(self, Z):
        return Z[:, list(self.indices)] @ np.asarray(self.coeffs) - 1

    def normalize(self, Z):
        """Rescale the group's coordinates onto the chart."""
        Z = Z.copy()
        idx = list(self.indices)
        s = Z[:, idx] @ np.asarray(self.coeffs)
        Z[:, idx] /= s[:, None]
        return Z


def _append_patches(H, Hz, Ht, Z, patches: Sequence[Patch], n: int):
    B = Z.shape[0]
    m = H.shape[1]
    Hf = np.empty((B, n), dtype=complex)
    Hzf = np.zeros((B, n, n), dtype=complex)
    Htf = np.zeros((B, n), dtype=complex)
    Hf[:, :m], Hzf[:, :m], Htf[:, :m] = H, Hz, Ht
    for r, patch in enumerate(patches, start=m):
        Hf[:, r] = patch.value(Z)
        Hzf[:, r, list(patch.indices)] = patch.coeffs
    return Hf, Hzf, Htf


class TotalDegreeHomotopy(Homotopy):
    """``gamma*t*G + (1-t)*F`` on one projective group ``(h, z_1..z_N)``.

    ``target`` is compiled from the homogenized equations with unknowns in the
    order ``h, z_1..z_N``; the start system is ``z_i^d_i - r_i h^d_i``.
    """

    def __init__(self, target: CompiledSystem, degrees: Sequence[int], r: Sequence[complex], gamma: complex, patch: Patch, params=None):
        self.target = target
        self.degrees = np.asarray(degrees)
        self.r = np.asarray(r, dtype=complex)
        self.gamma = gamma
        self.patch = patch
        self.params = params
        self.n = target.nu

    def evaluate(self, Z, t):
        F, JF = self.target.evaluate(Z, self.params)
        h = Z[:, :1]
        z = Z[:, 1:]
        d = self.degrees[None, :]
        zd1 = z ** (d - 1)
        hd1 = h ** (d - 1)
        G = zd1 * z - self.r * hd1 * h
        B, N = z.shape
        JG = np.zeros((B, N, N + 1), dtype=complex)
        JG[:, :, 0] = -self.r * d * hd1
        JG[:, np.arange(N), np.arange(N) + 1] = d * zd1
        tt = t[:, None]
        H = self.gamma * tt * G + (1 - tt) * F
        Hz = self.gamma * tt[:, :, None] * JG + (1 - tt)[:, :, None] * JF
        Ht = self.gamma * G - F
        return _append_patches(H, Hz, Ht, Z, [self.patch], self.n)

    def charts(self):
        return [self.patch]

    def affine_norm(self, Z):
        h = np.abs(Z[:, 0])
        with np.errstate(divide="ignore"):
            return np.abs(Z[:, 1:]).max(axis=1) / h


class ParameterHomotopy(Homotopy):
    """Straight-line parameter path ``p(t) = t*start + (1-t)*target``.

    The compiled system should be homogeneous in each patched group so that
    endpoints at infinity or on ``lambda_0 = 0`` stay finite.
    """

    def __init__(self, system: CompiledSystem, start, target, patches: Sequence[Patch]):
        self.system = system
        self.start = np.asarray(start, dtype=complex)
        self.target = np.asarray(target, dtype=complex)
        self.patches = list(patches)
        self.n = system.nu
        if system.m + len(self.patches) != self.n:
            raise ValueError("parameter homotopy is not square")

    def evaluate(self, Z, t):
        P = t[:, None] * self.start[None, :] + (1 - t)[:, None] * self.target[None, :]
        F, JU, JP = self.system.evaluate(Z, P, jac_params=True)
        Ht = JP @ (self.start - self.target)
        return _append_patches(F, JU, Ht, Z, self.patches, self.n)


# path tracking ---------------------------------------------------------------------


@dataclass
class TrackedPoint:
    coordinates: np.ndarray
    status: str
    condition: float
    residual: float
    steps: int = 0
    t: float = 0.0
    # size of each multiplier's gradient term at the point; see Layout.min_magnitude
    weights: np.ndarray | None = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def _newton(hom: Homotopy, Z, t, iters, tol):
    """Up to ``iters`` Newton steps per path; ok means an update fell below ``tol`` (relative)."""
    B = Z.shape[0]
    ok = np.zeros(B, dtype=bool)
    live = np.ones(B, dtype=bool)
    prev = np.full(B, np.inf)
    first = np.zeros(B)
    Z = Z.copy()
    for it in range(iters):
        idx = np.nonzero(live)[0]
        if not idx.size:
            break
        H, Hz, _ = hom.evaluate(Z[idx], t[idx])
        dz = _solve(Hz, -H)
        size = np.abs(dz).max(axis=1)
        bad = ~np.isfinite(size)
        dz[bad] = 0
        Z[idx] += dz
        scale = 1 + np.abs(Z[idx]).max(axis=1)
        conv = (size <= tol * scale) & ~bad
        # a growing correction means the predictor left the basin of this path
        grew = (size > prev[idx]) & ~conv
        ok[idx[conv]] = True
        live[idx[conv | bad | grew]] = False
        prev[idx] = size
        if it == 0:
            first = np.where(bad, np.inf, size)
    return Z, ok & np.isfinite(np.abs(Z).max(axis=1)), first


def _velocity(hom: Homotopy, Z, t):
    _, Hz, Ht = hom.evaluate(Z, t)
    return _solve(Hz, -Ht)


def _advance(hom, Z, t, h, streak, steps, status, active, t_end, settings):
    """Predictor-corrector steps on the ``active`` rows (in place) until each reaches ``t_end`` or stops."""
    active = active[status[active] == "tracking"]
    while active.size:
        z0 = Z[active]
        tt = t[active]
        dt = np.minimum(np.minimum(h[active], settings.max_relative_step * tt), tt - t_end)
        k1 = _velocity(hom, z0, tt)
        k2 = _velocity(hom, z0 - 0.5 * dt[:, None] * k1, tt - 0.5 * dt)
        k3 = _velocity(hom, z0 - 0.5 * dt[:, None] * k2, tt - 0.5 * dt)
        k4 = _velocity(hom, z0 - dt[:, None] * k3, tt - dt)
        zp = z0 - (dt / 6)[:, None] * (k1 + 2 * k2 + 2 * k3 + k4)
        t1 = tt - dt
        finite = np.isfinite(np.abs(zp).max(axis=1))
        zp[~finite] = z0[~finite]
        zc, ok, first = _newton(hom, zp, t1, settings.newton_iters, settings.newton_tol)
        ok &= finite
        # the corrector may only touch up the prediction, not relocate it
        moved = np.abs(zp - z0).max(axis=1)
        ok &= first <= settings.max_correction * moved + settings.newton_tol * (1 + np.abs(z0).max(axis=1))
        steps[active] += 1

        good = active[ok]
        Z[good] = zc[ok]
        t[good] = t1[ok]
        streak[good] += 1
        grow = good[streak[good] >= 5]
        h[grow] = np.minimum(2 * h[grow], settings.max_step)
        streak[grow] = 0

        bad = active[~ok]
        h[bad] /= 2
        streak[bad] = 0

        status[bad[h[bad] < settings.min_step]] = STALLED
        status[active[steps[active] >= settings.max_steps]] = STALLED
        norms = hom.affine_norm(Z[active])
        status[active[(norms > settings.divergence_bound) & (status[active] == "tracking")]] = DIVERGED
        status[good[(t[good] <= t_end * (1 + 1e-12)) & (status[good] == "tracking")]] = "endgame"
        active = active[status[active] == "tracking"]


def track_paths(hom: Homotopy, starts: np.ndarray, settings: TrackerSettings = TrackerSettings()) -> list[TrackedPoint]:
    """Track every start point from ``t = 1`` to ``t = 0`` and polish the endpoints."""
    starts = np.atleast_2d(np.asarray(starts, dtype=complex))
    B, n = starts.shape
    if B == 0:
        return []
    Z = starts.copy()
    t = np.ones(B)
    h = np.full(B, settings.initial_step)
    streak = np.zeros(B, dtype=int)
    steps = np.zeros(B, dtype=int)
    status = np.array(["tracking"] * B, dtype=object)
    cond = np.full(B, np.inf)
    resid = np.full(B, np.inf)
    cutoffs = (settings.endgame_start,) + tuple(settings.endgame_fallback)
    W = Z.copy()  # working copy; Z holds the reported endpoints
    reach = np.full(B, np.nan)  # affine norm at the previous cutoff
    active = np.arange(B)
    for stage, t_end in enumerate(cutoffs):
        _advance(hom, W, t, h, streak, steps, status, active, t_end, settings)
        with np.errstate(all="ignore"):
            norms = hom.affine_norm(W[active])
        growth, reach[active] = norms / reach[active], norms
        if not stage:
            Z[:] = W
        else:
            # a retried path that gets stuck keeps its earlier verdict
            lost = active[status[active] != "endgame"]
            status[lost] = FAILED
            t[lost] = 0.0
        done = np.nonzero(status == "endgame")[0]
        if not done.size:
            break
        Zd, rd, cd, last = polish(hom, W[done], settings.polish_iters)
        finished = np.where((rd <= settings.residual_tol) & (last <= settings.final_step_tol), CONVERGED, FAILED)
        finished[hom.affine_norm(Zd) > settings.divergence_bound] = DIVERGED
        if stage and stage + 1 == len(cutoffs):
            # still growing between the last two cutoffs: a root at infinity
            # that the norm bound has not caught yet
            g = dict(zip(active, growth))
            fast = np.array([g.get(i, 1.0) > 10 for i in done])
            finished[(finished == FAILED) & fast] = DIVERGED
        Z[done] = Zd
        resid[done] = rd
        cond[done] = cd
        status[done] = finished
        t[done] = 0.0
        if stage + 1 < len(cutoffs):
            # a slow polish gets another try from further down the path
            active = done[finished == FAILED]
            status[active] = "tracking"
            t[active] = t_end
    return [TrackedPoint(Z[i].copy(), str(status[i]), float(cond[i]), float(resid[i]), int(steps[i]), float(t[i])) for i in range(B)]


def polish(hom: Homotopy, Z: np.ndarray, iters: int):
    """Newton at ``t = 0``.

    Returns (points, residuals, condition numbers, last relative Newton step).
    Near a regular root the last step is at rounding level; near a singular
    one Newton only converges linearly and the step stays visible.
    """
    Z = np.array(Z, dtype=complex)
    zero = np.zeros(Z.shape[0])
    last = np.full(Z.shape[0], np.inf)
    for _ in range(iters):
        H, Hz, _ = hom.evaluate(Z, zero)
        dz = _solve(Hz, -H)
        bad = ~np.isfinite(dz).all(axis=1)
        dz[bad] = 0
        Z = Z + dz
        last = np.where(bad, np.inf, np.abs(dz).max(axis=1) / (1 + np.abs(Z).max(axis=1)))
        if last.max(initial=0) < 1e-15:
            break
    _, Hz, _ = hom.evaluate(Z, zero)
    with np.errstate(all="ignore"):
        resid = hom.residual(Z)
    cond = _condition(Hz)
    return Z, resid, cond, last


def _condition(A: np.ndarray, passes: int = 100, settle: float = 1e-3) -> np.ndarray:
    """Condition numbers after alternately scaling rows and columns to unit norm; ``inf`` where undefined.

    Diagonal scaling cannot hide a singular matrix, but it does stop badly
    scaled equations or coordinates (large roots, tiny multipliers) from
    posing as near-singularity.  Scaling stops once every column norm is
    within ``settle`` of one, or after ``passes`` rounds.
    """
    cond = np.full(A.shape[0], np.inf)
    with np.errstate(all="ignore"):
        for _ in range(passes):
            norms = np.linalg.norm(A, axis=2, keepdims=True)
            A = A / np.where(norms > 0, norms, 1)
            norms = np.linalg.norm(A, axis=1, keepdims=True)
            A = A / np.where(norms > 0, norms, 1)
            rows = np.linalg.norm(A, axis=2)
            if not (np.abs(rows[np.isfinite(rows) & (rows > 0)] - 1) > settle).any():
                break
        ok = np.isfinite(A).all(axis=(1, 2))
        for i in np.nonzero(ok)[0]:
            try:
                cond[i] = np.linalg.cond(A[i])
            except np.linalg.LinAlgError:
                pass
    return np.where(np.isfinite(cond), cond, np.inf)


def track_path(hom: Homotopy, start, settings: TrackerSettings = TrackerSettings()) -> TrackedPoint:
    return track_paths(hom, np.asarray(start, dtype=complex)[None, :], settings)[0]


# total-degree start systems ---------------------------------------------------------


def homogenize_groups(polys: Sequence[Polynomial], groups: Sequence[Sequence[int]], hom_names: Sequence[str]):
    """Add one homogenizing variable per group (prepended to the ring); returns ``(ring, polys, hom indices)``.

    Groups are given as ring indices of ``polys[0].ring``; indices shift by
    the number of groups in the new ring.
    """
    ring = polys[0].ring
    new_ring = VariableRing(tuple(hom_names) + ring.names, ring.field, ring.precision)
    shift = len(hom_names)
    lifted = [p.embed(new_ring) for p in polys]
    new_groups = [[i + shift for i in g] for g in groups]
    hom = list(range(shift))
    return new_ring, [p.homogenize(new_groups, hom) for p in lifted], hom


def total_degree_start(degrees: Sequence[int], r: Sequence[complex]) -> np.ndarray:
    """All solutions of ``z_i^d_i = r_i``; the Bezout number of rows."""
    if any(d < 1 for d in degrees):
        raise ValueError("total-degree start needs every equation of positive degree")
    roots = []
    for d, ri in zip(degrees, r):
        base = complex(ri) ** (1.0 / d)
        roots.append([base * np.exp(2j * np.pi * j / d) for j in range(d)])
    return np.array(list(product(*roots)), dtype=complex).reshape(-1, len(degrees))


@dataclass
class TotalDegreeSetup:
    homotopy: TotalDegreeHomotopy
    starts: np.ndarray
    ring: VariableRing
    equations: list[Polynomial]


def total_degree_homotopy(system: RemovalSystem, b: Sequence[complex] | None, rng: np.random.Generator) -> TotalDegreeSetup:
    """Homotopy from ``z_i^d_i - r_i`` to the system at fixed parameters ``b``.

    Start points are returned in projective coordinates ``(h, z)`` normalized
    onto a random patch.
    """
    if system.params:
        if b is None or len(b) != len(system.params):
            raise ValueError("parameter values required")
    eqs = list(system.equations)
    unknowns = list(system.unknowns)
    degrees = [eq.degree_in(unknowns) for eq in eqs]
    if any(d < 1 for d in degrees):
        raise ValueError("degenerate system: an equation has degree zero in the unknowns")
    ring, homog, hom = homogenize_groups(eqs, [unknowns], [_fresh_hom(system.ring)])
    compiled = CompiledSystem(homog, [hom[0]] + [u + 1 for u in unknowns], [p + 1 for p in system.params])
    n = len(unknowns) + 1
    r = np.exp(2j * np.pi * rng.random(len(degrees)))
    gamma = complex(np.exp(2j * np.pi * rng.random()))
    patch = Patch(tuple(range(n)), tuple(complex(c) for c in np.exp(2j * np.pi * rng.random(n))))
    affine = total_degree_start(degrees, r)
    starts = np.concatenate([np.ones((affine.shape[0], 1), dtype=complex), affine], axis=1)
    starts = patch.normalize(starts)
    params = None if not system.params else np.asarray(b, dtype=complex)
    hom_obj = TotalDegreeHomotopy(compiled, degrees, r, gamma, patch, params)
    return TotalDegreeSetup(hom_obj, starts, ring, homog)


def _fresh_hom(ring: VariableRing, stem: str = "h") -> str:
    i = 0
    while f"{stem}{i}" in ring.names:
        i += 1
    return f"{stem}{i}"


# witness sets ----------------------------------------------------------------------


@dataclass(frozen=True)
class Layout:
    """Coordinates are stored as ``(h, x_1..x_P, l0, l_1..l_c)``.

    The affine point is ``x / h`` with multipliers ``l / l0``; keeping both
    groups projective lets endpoints that leave the chart stay finite.
    """

    primal: int
    multipliers: int

    @property
    def size(self) -> int:
        return self.primal + self.multipliers + 2

    def groups(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        P = self.primal
        return tuple(range(P + 1)), tuple(range(P + 1, self.size))

    def from_affine(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        B = X.shape[0]
        one = np.ones((B, 1), dtype=complex)
        return np.concatenate([one, X[:, : self.primal], one, X[:, self.primal :]], axis=1)

    def to_affine(self, Z: np.ndarray) -> np.ndarray:
        Z = np.atleast_2d(Z)
        P = self.primal
        with np.errstate(all="ignore"):
            x = Z[:, 1 : P + 1] / Z[:, :1]
            lam = Z[:, P + 2 :] / Z[:, P + 1 : P + 2]
        return np.concatenate([x, lam], axis=1)

    def canonical(self, Z: np.ndarray) -> np.ndarray:
        """Scale each group so its largest entry is exactly one."""
        Z = np.array(np.atleast_2d(Z), dtype=complex)
        rows = np.arange(Z.shape[0])
        for g in self.groups():
            g = list(g)
            block = Z[:, g]
            piv = block[rows, np.abs(block).argmax(axis=1)]
            piv[piv == 0] = 1
            Z[:, g] = block / piv[:, None]
        return Z

    def key(self, Z: np.ndarray) -> np.ndarray:
        """Chart-free representative for duplicate detection.

        Each group is scaled to unit norm with its phase fixed by a generic
        linear form, so ties in the largest entry cannot split a point.
        """
        Z = np.array(np.atleast_2d(Z), dtype=complex)
        for g in self.groups():
            g = list(g)
            block = Z[:, g]
            form = block @ _KEY_FORM[: len(g)]
            scale = np.linalg.norm(block, axis=1) * np.exp(1j * np.angle(form))
            scale[scale == 0] = 1
            Z[:, g] = block / scale[:, None]
        return Z

    def min_magnitude(self, Z: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
        """Distance to the nearest coordinate hyperplane, chart hyperplanes included.

        Primal coordinates are taken as they are.  Each multiplier is scaled
        by ``weights`` (the size of its gradient term ``lambda_i dF_i/dz z``),
        which makes its test comparable with the unit-size data.  ``h`` and
        ``l0`` are measured relative to their group.
        """
        Z = np.atleast_2d(Z)
        if Z.shape[0] == 0:
            return np.zeros(0)
        C = np.abs(self.canonical(Z))
        P = self.primal
        with np.errstate(all="ignore"):
            aff = np.abs(self.to_affine(Z))
            if weights is not None:
                aff[:, P:] *= np.atleast_2d(weights)
        parts = [C[:, :1], C[:, P + 1 : P + 2], np.nan_to_num(aff, nan=0.0, posinf=np.inf)]
        return np.concatenate(parts, axis=1).min(axis=1)


@dataclass
class WitnessSet:
    """Endpoints at parameters ``b`` with counting flags; ``degree`` counts the flags."""

    k: int
    layout: Layout
    points: list[TrackedPoint]
    flags: list[bool]
    b: tuple[complex, ...]
    tolerance: float = 1e-6
    settings: TrackerSettings = field(default_factory=TrackerSettings)

    @property
    def degree(self) -> int:
        return int(sum(self.flags))

    def counted(self) -> list[TrackedPoint]:
        return [p for p, f in zip(self.points, self.flags) if f]

    def coordinates(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, self.layout.size), dtype=complex)
        return np.array([p.coordinates for p in self.points])


def classify(points: Sequence[TrackedPoint], layout: Layout, tolerance: float, settings: TrackerSettings) -> list[bool]:
    """Counted iff converged, well conditioned, off every coordinate hyperplane, and not a repeat."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if not points:
        return []
    Z = np.array([p.coordinates for p in points])
    W = None
    if all(p.weights is not None for p in points):
        W = np.array([p.weights for p in points], dtype=float).reshape(len(points), layout.multipliers)
    mags = layout.min_magnitude(Z, W)
    ok = [
        p.converged and p.condition <= settings.max_condition and bool(m >= tolerance)
        for p, m in zip(points, mags)
    ]
    keep = _first_of_clusters(layout.key(Z), settings.duplicate_tol)
    return [o and k for o, k in zip(ok, keep)]


# fixed generic coefficients, so keys agree across runs and processes
_KEY_FORM = np.random.default_rng(20240917).standard_normal((512, 2)) @ np.array([1, 1j])


def _first_of_clusters(C: np.ndarray, radius: float) -> list[bool]:
    """True for the first point of every cluster of points within ``radius`` in max-norm."""
    from scipy.spatial import cKDTree

    if len(C) == 0:
        return []
    R = np.concatenate([C.real, C.imag], axis=1)
    R = np.nan_to_num(R, nan=1e300, posinf=1e300, neginf=-1e300)
    tree = cKDTree(R)
    keep = [True] * len(C)
    for i, j in sorted(tree.query_pairs(radius, p=np.inf)):
        if keep[i] and keep[j]:
            keep[j] = False
    return keep


def multiplier_weights(system: RemovalSystem, layout: Layout, Z: np.ndarray, b: Sequence[complex]) -> np.ndarray:
    """``max_j |dF_i/dz_j * z_j|`` for each generator ``F_i`` at the affine points of ``Z``."""
    Z = np.atleast_2d(Z)
    c = layout.multipliers
    if Z.shape[0] == 0 or c == 0:
        return np.ones((Z.shape[0], c))
    gens = CompiledSystem(system.equations[:c], system.primal, system.params)
    with np.errstate(all="ignore"):
        X = layout.to_affine(Z)[:, : layout.primal]
        P = np.tile(np.asarray(b, dtype=complex), (len(X), 1)) if system.params else None
        _, JU = gens.evaluate(X, P)
        W = np.abs(JU * X[:, None, :]).max(axis=2)
    return np.where(np.isfinite(W), W, np.inf)


def _attach_weights(points: list[TrackedPoint], system: RemovalSystem, layout: Layout, b) -> list[TrackedPoint]:
    if points:
        W = multiplier_weights(system, layout, np.array([p.coordinates for p in points]), b)
        for p, w in zip(points, W):
            p.weights = w
    return points


def ambiguous(ws: WitnessSet) -> int:
    """Regular endpoints whose primal part lies below the tolerance yet clearly off the hyperplane.

    A coordinate counts as clearly nonzero when it exceeds the point's own
    error, about ``1e3 * eps * condition``.  Such a point is a genuine root
    that the tolerance would drop, so the parameters that produced it are
    not generic enough for a witness count.
    """
    if not ws.points:
        return 0
    Z = ws.coordinates()
    P = ws.layout.primal
    with np.errstate(all="ignore"):
        primal = np.concatenate([np.abs(ws.layout.canonical(Z))[:, :1], np.abs(ws.layout.to_affine(Z))[:, :P]], axis=1).min(axis=1)
    cond = np.array([p.condition for p in ws.points])
    regular = np.array([p.converged and p.condition <= ws.settings.max_condition for p in ws.points])
    resolution = 1e3 * np.finfo(float).eps * cond
    return int(np.sum(regular & (primal < ws.tolerance) & (primal > resolution)))


def reclassify(ws: WitnessSet, tolerance: float) -> WitnessSet:
    """Recompute flags from stored endpoints; nothing is tracked again."""
    flags = classify(ws.points, ws.layout, tolerance, ws.settings)
    return replace(ws, flags=flags, tolerance=tolerance)


class TrackingFailure(RuntimeError):
    pass


def _worker_count() -> int:
    import os

    env = os.environ.get("MLOBSTRUCTION_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"MLOBSTRUCTION_WORKERS must be an integer, got {env!r}") from None
    return 1


def _track_chunk(args):
    hom, starts, settings = args
    return track_paths(hom, starts, settings)


def track_many(hom: Homotopy, starts: np.ndarray, settings: TrackerSettings, chunk: int = 4096) -> list[TrackedPoint]:
    """Track in chunks, optionally across processes; results keep input order."""
    starts = np.atleast_2d(starts)
    pieces = [starts[i : i + chunk] for i in range(0, len(starts), chunk)]
    workers = min(_worker_count(), len(pieces))
    if workers <= 1:
        out = []
        for piece in pieces:
            out.extend(track_paths(hom, piece, settings))
        return out
    from concurrent.futures import ProcessPoolExecutor

    # smaller pieces balance the load
    step = max(64, -(-len(starts) // (4 * workers)))
    pieces = [starts[i : i + step] for i in range(0, len(starts), step)]
    with ProcessPoolExecutor(workers) as pool:
        results = pool.map(_track_chunk, [(hom, p, settings) for p in pieces])
        return [pt for part in results for pt in part]


def _trivially_empty(system: RemovalSystem) -> bool:
    unknowns = system.unknowns
    return any(eq.degree_in(unknowns) == 0 and not eq.is_zero() for eq in system.equations)


def _total_degree_endpoints(system, b, rng, settings, layout):
    setup = total_degree_homotopy(system, b, rng)
    log.info("k=%d: tracking %d total-degree paths", system.k, len(setup.starts))
    pts = track_many(setup.homotopy, setup.starts, settings)
    out = []
    for p in pts:
        if p.status == CONVERGED:
            # move to the two-group layout; the chart value h stays in front
            z = p.coordinates
            coords = layout.from_affine(z[1:] / z[0])[0]
            p = replace(p, coordinates=layout.canonical(coords)[0])
        out.append(p)
    return out


def _linear_product_endpoints(system, b, rng, settings, layout):
    setup = bihomogeneous_system(system)
    patches = random_patches(layout, rng)
    hom, starts = linear_product_homotopy(setup, b, patches, rng)
    log.info("k=%d: tracking %d linear-product paths", system.k, len(starts))
    pts = track_many(hom, starts, settings)
    for p in pts:
        p.coordinates = layout.canonical(p.coordinates)[0]
    return pts


START_SYSTEMS = {"linear-product": _linear_product_endpoints, "total-degree": _total_degree_endpoints}


def solve_generic(
    system: RemovalSystem,
    b: Sequence[complex] | None,
    rng: np.random.Generator,
    settings: TrackerSettings = TrackerSettings(),
    tolerance: float = 1e-6,
    start: str = "linear-product",
) -> WitnessSet:
    """Solve the system at parameters ``b`` from a generic start system.

    ``start="linear-product"`` uses products of random linear forms that
    respect the two variable groups; ``"total-degree"`` homogenizes all
    unknowns together.  Independent start systems are run until one adds no
    counted point (at least ``settings.min_runs`` of them), which recovers
    roots whose paths were lost near the degenerate part at infinity.
    Endpoints are merged, every converged one is kept, and the flags mark
    the ones that count.
    """
    if start not in START_SYSTEMS:
        raise ValueError(f"unknown start system {start!r}")
    layout = Layout(system.primal_count, system.lagrange_count)
    b = tuple(complex(v) for v in (b or ()))
    if len(b) != len(system.params):
        raise ValueError(f"expected {len(system.params)} parameter values, got {len(b)}")
    if _trivially_empty(system):
        return WitnessSet(system.k, layout, [], [], b, tolerance, settings)
    merged: list[TrackedPoint] = []
    previous = -1
    for run in range(settings.max_runs):
        fresh = _attach_weights(_endpoints(start, system, b, rng, settings, layout), system, layout, b)
        merged = _merge(merged + fresh, layout, settings)
        found = sum(classify(merged, layout, tolerance, settings))
        log.info("k=%d: run %d, %d points counted", system.k, run + 1, found)
        if run + 1 >= settings.min_runs and found == previous:
            break
        previous = found
    return WitnessSet(system.k, layout, merged, classify(merged, layout, tolerance, settings), b, tolerance, settings)


def _endpoints(start, system, b, rng, settings, layout) -> list[TrackedPoint]:
    for attempt in range(2):
        pts = START_SYSTEMS[start](system, b, rng, settings, layout)
        stalled = sum(p.status == STALLED for p in pts)
        if stalled <= settings.max_failure_rate * len(pts):
            return [p for p in pts if p.status == CONVERGED]
        log.warning("k=%d: %d of %d paths stalled; retrying with a fresh gamma", system.k, stalled, len(pts))
    raise TrackingFailure(f"k={system.k}: {stalled} of {len(pts)} paths stalled twice")


def _merge(points: list[TrackedPoint], layout: Layout, settings: TrackerSettings) -> list[TrackedPoint]:
    """Drop repeats, keeping the best conditioned copy of each endpoint."""
    if not points:
        return []
    points = sorted(points, key=lambda p: p.condition)
    keep = _first_of_clusters(layout.key(np.array([p.coordinates for p in points])), settings.duplicate_tol)
    return [p for p, k in zip(points, keep) if k]


@dataclass
class ParameterSetup:
    compiled: CompiledSystem
    ring: VariableRing
    layout: Layout
    bidegrees: list[tuple[int, int]]


def bihomogeneous_system(system: RemovalSystem) -> ParameterSetup:
    """Homogenize primal unknowns with ``h`` and multipliers with ``l0``; parameters stay affine."""
    ring = system.ring
    names = ring.names
    h = _fresh_hom(ring, "h")
    l0 = _fresh_hom(ring, "l")
    primal = [names[i] for i in system.primal]
    mult = [names[i] for i in system.multipliers]
    params = [names[i] for i in system.params]
    new_names = [h] + primal + [l0] + mult + params
    new = VariableRing(tuple(new_names), ring.field, ring.precision)
    P, c = len(primal), len(mult)
    g1 = list(range(1, P + 1))
    g2 = list(range(P + 2, P + 2 + c))
    eqs = [eq.embed(new).homogenize([g1, g2], [0, P + 1]) for eq in system.equations]
    layout = Layout(P, c)
    G1, G2 = layout.groups()
    bideg = [(eq.degree_in(G1), eq.degree_in(G2)) for eq in eqs]
    compiled = CompiledSystem(eqs, list(range(layout.size)), list(range(layout.size, len(new_names))))
    return ParameterSetup(compiled, new, layout, bideg)


class LinearProductHomotopy(Homotopy):
    """``gamma*t*G + (1-t)*F`` where each ``G_i`` is a product of random linear forms.

    ``factors[i]`` has one row per linear form, written over all unknowns
    (zero outside the form's group), so ``G_i`` matches the bidegree of ``F_i``.
    """

    def __init__(self, target: CompiledSystem, params, factors: Sequence[np.ndarray], gamma: complex, patches: Sequence[Patch]):
        self.target = target
        self.params = None if params is None or not len(params) else np.asarray(params, dtype=complex)
        self.factors = [np.asarray(f, dtype=complex) for f in factors]
        self.gamma = gamma
        self.patches = list(patches)
        self.n = target.nu

    def start_values(self, Z):
        B = Z.shape[0]
        G = np.empty((B, len(self.factors)), dtype=complex)
        JG = np.zeros((B, len(self.factors), self.n), dtype=complex)
        for i, V in enumerate(self.factors):
            L = Z @ V.T
            G[:, i] = L.prod(axis=1)
            for j in range(V.shape[0]):
                others = np.delete(L, j, axis=1).prod(axis=1)
                JG[:, i, :] += others[:, None] * V[j][None, :]
        return G, JG

    def evaluate(self, Z, t):
        F, JF = self.target.evaluate(Z, self.params)
        G, JG = self.start_values(Z)
        tt = t[:, None]
        H = self.gamma * tt * G + (1 - tt) * F
        Hz = self.gamma * tt[:, :, None] * JG + (1 - tt)[:, :, None] * JF
        Ht = self.gamma * G - F
        return _append_patches(H, Hz, Ht, Z, self.patches, self.n)


def linear_product_homotopy(setup: ParameterSetup, b, patches: Sequence[Patch], rng: np.random.Generator):
    """Random linear-product start system and all of its solutions.

    A start solution picks one linear factor per equation so that each
    group receives as many linear equations as its projective dimension.
    """
    layout = setup.layout
    G1, G2 = layout.groups()
    n = layout.size

    def random_form(group):
        v = np.zeros(n, dtype=complex)
        v[list(group)] = np.exp(2j * np.pi * rng.random(len(group)))
        return v

    xforms, lforms, factors = [], [], []
    for a, bdeg in setup.bidegrees:
        xs = [random_form(G1) for _ in range(a)]
        ls = [random_form(G2) for _ in range(bdeg)]
        xforms.append(xs)
        lforms.append(ls)
        factors.append(np.array(xs + ls).reshape(a + bdeg, n))
    m = len(setup.bidegrees)
    P, c = len(G1) - 1, len(G2) - 1

    def group_solutions(group, patch, rows_per_eq):
        """All solutions of one linear equation per listed equation plus the patch."""
        g = list(group)
        choices = list(product(*[range(len(r)) for r in rows_per_eq]))
        if not choices:
            return np.zeros((0, len(g)), dtype=complex)
        A = np.empty((len(choices), len(g), len(g)), dtype=complex)
        rhs = np.zeros((len(choices), len(g)), dtype=complex)
        for ci, choice in enumerate(choices):
            for r, (forms, j) in enumerate(zip(rows_per_eq, choice)):
                A[ci, r] = forms[j][g]
            A[ci, -1] = patch.coeffs
            rhs[ci, -1] = 1
        return np.linalg.solve(A, rhs[..., None])[..., 0]

    from itertools import combinations

    starts = []
    for S in combinations(range(m), P):
        rest = [i for i in range(m) if i not in S]
        if any(not xforms[i] for i in S) or any(not lforms[i] for i in rest):
            continue
        X = group_solutions(G1, patches[0], [xforms[i] for i in S])
        L = group_solutions(G2, patches[1], [lforms[i] for i in rest])
        for x in X:
            for l in L:
                starts.append(np.concatenate([x, l]))
    starts = np.array(starts, dtype=complex).reshape(-1, n)
    gamma = complex(np.exp(2j * np.pi * rng.random()))
    hom = LinearProductHomotopy(setup.compiled, b, factors, gamma, patches)
    return hom, starts


def random_patches(layout: Layout, rng: np.random.Generator) -> list[Patch]:
    return [Patch(g, tuple(complex(c) for c in np.exp(2j * np.pi * rng.random(len(g))))) for g in layout.groups()]


def parameter_track(
    system: RemovalSystem,
    ws: WitnessSet,
    target: Sequence[complex],
    rng: np.random.Generator,
    settings: TrackerSettings | None = None,
    tolerance: float | None = None,
) -> WitnessSet:
    """Move the counted witness points from ``ws.b`` to ``target`` and classify the endpoints."""
    settings = settings or ws.settings
    tolerance = ws.tolerance if tolerance is None else tolerance
    target = tuple(complex(v) for v in target)
    if len(target) != len(ws.b):
        raise ValueError(f"expected {len(ws.b)} target parameters, got {len(target)}")
    starts = np.array([p.coordinates for p in ws.counted()])
    if len(starts) == 0:
        return WitnessSet(ws.k, ws.layout, [], [], target, tolerance, settings)
    setup = bihomogeneous_system(system)
    if setup.layout != ws.layout:
        raise ValueError("witness set does not belong to this system")
    patches = random_patches(setup.layout, rng)
    for patch in patches:
        starts = patch.normalize(starts)
    hom = ParameterHomotopy(setup.compiled, ws.b, target, patches)
    pts = track_many(hom, starts, settings)
    for p in pts:
        p.coordinates = setup.layout.canonical(p.coordinates)[0]
    _attach_weights(pts, system, ws.layout, target)
    return WitnessSet(ws.k, ws.layout, pts, classify(pts, ws.layout, tolerance, settings), target, tolerance, settings)


def replace_settings(settings: TrackerSettings, **changes) -> TrackerSettings:
    return replace(settings, **changes)
