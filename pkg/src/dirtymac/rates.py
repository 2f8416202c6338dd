"""Closed-form rate bounds, gap functions, envelopes and root equations.

All rates are in bits per channel use and ``C(x) = 0.5 * log2(1 + x)``.
Functions taking powers broadcast over numpy arrays unless noted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .channels import ConfigError, PowerConfig

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2
SHAPING_LOSS_1D = 0.5 * math.log2(math.pi * math.e / 6.0)
STATED_LOW_SNR_SLOPE = 0.425  # slope quoted in the literature for the symmetric inner bound
ROOT_TOL = 1e-9
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ModeError(ValueError):
    """A bound was requested outside the regime where it holds."""


def cap(x):
    """Gaussian capacity ``0.5 * log2(1 + x)``."""
    return 0.5 * np.log2(1.0 + np.asarray(x, dtype=float)) if np.ndim(x) else 0.5 * math.log2(1.0 + x)


def gaussian_entropy(var):
    """Differential entropy of N(0, var) in bits."""
    return 0.5 * np.log2(2.0 * np.pi * np.e * np.asarray(var, dtype=float))


class Clamped(NamedTuple):
    """``[raw]^+`` together with a flag telling whether clamping happened."""

    value: float
    raw: float
    clamped: bool


def positive_part(raw) -> Clamped:
    raw = float(raw)
    return Clamped(max(raw, 0.0), raw, raw < 0.0)


@dataclass(frozen=True)
class RatePair:
    r1: float
    r2: float

    def __post_init__(self):
        for v in (self.r1, self.r2):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"rates must be finite and nonnegative, got {v}")

    @property
    def total(self) -> float:
        return self.r1 + self.r2


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Constraint:
    """Half-space ``coeffs . R <= bound``."""

    coeffs: tuple
    bound: float

    def slack(self, point) -> float:
        return self.bound - float(np.dot(self.coeffs, point))


@dataclass(frozen=True, eq=False)
class Region:
    """Rate region given by half-space constraints on nonnegative rates.

    ``vertices`` lists the extreme points (for two users, in
    counter-clockwise order starting at the origin).  ``notes`` holds named
    special points or flags.
    """

    constraints: tuple
    vertices: tuple
    label: str = ""
    notes: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.constraints[0].coeffs)

    def contains(self, point, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        if np.any(p < -tol):
            return False
        return all(c.slack(p) >= -tol for c in self.constraints)

    def max_sum(self) -> float:
        return max(sum(v) for v in self.vertices)

    @classmethod
    def from_constraints(cls, constraints: Sequence[Constraint], label: str = "", **notes) -> "Region":
        constraints = tuple(constraints)
        dim = len(constraints[0].coeffs)
        if dim == 2:
            verts = _polygon_vertices(constraints)
        else:
            # simplex-type regions: origin plus the largest point on each axis
            verts = [tuple([0.0] * dim)]
            for i in range(dim):
                e = np.zeros(dim)
                e[i] = 1.0
                t = min(c.bound / c.coeffs[i] for c in constraints if c.coeffs[i] > 0)
                verts.append(tuple(t * e))
        return cls(constraints, tuple(verts), label, dict(notes))

    @classmethod
    def from_points(cls, points, label: str = "", **notes) -> "Region":
        """Downward-closed convex hull of achievable 2-user rate points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        pts = np.clip(pts, 0.0, None)
        xmax = pts[:, 0].max()
        ymax = pts[:, 1].max()
        cloud = np.vstack([pts, [[0.0, ymax], [xmax, 0.0]]])
        order = np.lexsort((-cloud[:, 1], cloud[:, 0]))
        cloud = cloud[order]
        hull = upper_hull(cloud[:, 0], cloud[:, 1])
        chain = [tuple(cloud[i]) for i in hull]
        # keep the part of the chain that is non-increasing in R2
        chain = [p for p in chain if p[1] >= 0]
        cons = []
        for (x0, y0), (x1, y1) in zip(chain[:-1], chain[1:]):
            if x1 - x0 <= 0:
                continue
            a, b = y0 - y1, x1 - x0
            if a < 0:
                continue
            c = a * x0 + b * y0
            norm = max(a, b)
            cons.append(Constraint((a / norm, b / norm), c / norm))
        if not cons:
            cons = [Constraint((1.0, 0.0), xmax), Constraint((0.0, 1.0), ymax)]
        else:
            cons.append(Constraint((1.0, 0.0), xmax))
            cons.append(Constraint((0.0, 1.0), ymax))
        verts = [(0.0, 0.0), (xmax, 0.0)] + [p for p in reversed(chain) if p != (xmax, 0.0) and p != (0.0, ymax)]
        verts.append((0.0, ymax))
        verts = _dedupe(verts)
        return cls(tuple(cons), tuple(verts), label, dict(notes))

    def boundary(self, per_edge: int = 20) -> np.ndarray:
        """Points sampled along the outer (dominant) boundary of a 2-D region."""
        v = [p for p in self.vertices if p != (0.0, 0.0)]
        out = []
        for p, q in zip(v[:-1], v[1:]):
            t = np.linspace(0.0, 1.0, per_edge, endpoint=False)
            out.append(np.outer(1 - t, p) + np.outer(t, q))
        out.append(np.array([v[-1]]))
        return np.vstack(out)


def _dedupe(points, tol=1e-12):
    out = []
    for p in points:
        if not out or max(abs(p[0] - out[-1][0]), abs(p[1] - out[-1][1])) > tol:
            out.append((float(p[0]), float(p[1])))
    return out


def _polygon_vertices(constraints) -> list:
    lines = [(np.array(c.coeffs, dtype=float), c.bound) for c in constraints]
    lines += [(np.array([1.0, 0.0]), 0.0), (np.array([0.0, 1.0]), 0.0)]
    pts = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            a = np.vstack([lines[i][0], lines[j][0]])
            if abs(np.linalg.det(a)) < 1e-14:
                continue
            p = np.linalg.solve(a, [lines[i][1], lines[j][1]])
            if np.all(p >= -1e-12) and all(c.slack(p) >= -1e-10 for c in constraints):
                pts.append(np.clip(p, 0.0, None))
    if not pts:
        raise ValueError("empty region")
    pts = np.unique(np.round(np.array(pts), 14), axis=0)
    # origin first, then counter-clockwise from the R1 axis
    verts = [tuple(map(float, p)) for p in pts if p[0] > 0 or p[1] > 0]
    verts.sort(key=lambda p: math.atan2(p[1], p[0]))
    return [(0.0, 0.0)] + verts


class Verdict(NamedTuple):
    contained: bool
    max_violation: float
    touches: bool


def containment_check(inner: Region, outer: Region, tol: float = 1e-9, points=None) -> Verdict:
    """Check that every vertex of ``inner`` (and any extra ``points``) lies in ``outer``.

    ``touches`` reports whether some inner vertex sits on a non-axis outer
    constraint, i.e. the two boundaries meet.
    """
    pts = [np.asarray(v, dtype=float) for v in inner.vertices]
    if points is not None:
        pts += [np.asarray(p, dtype=float) for p in np.atleast_2d(points)]
    worst = 0.0
    touches = False
    for p in pts:
        for c in outer.constraints:
            s = c.slack(p)
            worst = max(worst, -s)
            if abs(s) <= tol and np.any(p > tol):
                touches = True
    return Verdict(worst <= tol, worst, touches)


# ---------------------------------------------------------------------------
# concave envelopes


def upper_hull(x, y) -> list:
    """Indices of the upper concave hull (monotone chain), ``x`` sorted."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


@dataclass(frozen=True, eq=False)
class EnvelopeFn:
    x: np.ndarray
    raw: np.ndarray
    hull: np.ndarray


def uce(x, f) -> EnvelopeFn:
    """Upper concave envelope of sampled values ``f`` on the grid ``x``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if x.ndim != 1 or x.shape != f.shape:
        raise ValueError("x and f must be 1-D arrays of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 grid points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("grid must be strictly increasing")
    idx = upper_hull(x, f)
    hull = np.interp(x, x[idx], f[idx])
    hull = np.maximum(hull, f)  # guard against interpolation round-off
    return EnvelopeFn(x, f, hull)


def bisect(fn, lo: float, hi: float) -> float:
    return optimize.bisect(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def tangent_point(c: float = 0.5, shift_bits: float = 0.0) -> float:
    """Tangency abscissa of the chord from the origin to ``0.5*log2(c + x) - shift``.

    Solves ``x / (x + c) = ln(x + c) - 2 * shift * ln 2``.
    """
    s = 2.0 * shift_bits * LN2
    g = lambda x: x / (x + c) - math.log(x + c) + s  # noqa: E731
    lo = math.exp(s) - c  # the curve crosses zero here
    lo = max(lo, 1e-12)
    hi = 2.0 * lo + 2.0
    while g(hi) > 0:
        hi *= 2.0
    return bisect(g, lo, hi)


def chord_envelope(x, c: float = 0.5, shift_bits: float = 0.0):
    """Concave envelope of ``[0.5*log2(c + x) - shift]^+`` (for ``c <= 1``).

    Below the tangency point the envelope is the chord from the origin.
    """
    x = np.asarray(x, dtype=float)
    xt = tangent_point(c, shift_bits)
    ft = 0.5 * math.log2(c + xt) - shift_bits
    with np.errstate(divide="ignore"):
        f = 0.5 * np.log2(c + x) - shift_bits
    out = np.where(x >= xt, f, ft * x / xt)
    return out if out.ndim else float(out)


def timeshare_envelope(rate_fn, p1, p2, n, t_max: float = 1e6, n_grid: int = 241, iters: int = 60):
    """Time sharing between silence and one operating point.

    For each ``(p1, p2, n)`` returns ``max_{t >= 1} rate_fn(t*p1, t*p2, n) / t``:
    transmitting a fraction ``1/t`` of the time with powers scaled by ``t``
    meets the average power constraints.
    """
    p1, p2, n = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (p1, p2, n)))
    shape = p1.shape
    p1, p2, n = p1.ravel(), p2.ravel(), n.ravel()
    logt = np.linspace(0.0, math.log(t_max), n_grid)
    t = np.exp(logt)
    out = np.empty(p1.shape)
    chunk = max(1, 2**22 // n_grid)
    for s in range(0, len(p1), chunk):
        a, b, m = p1[s:s + chunk, None], p2[s:s + chunk, None], n[s:s + chunk, None]
        vals = rate_fn(a * t, b * t, m) / t
        j = np.argmax(vals, axis=1)
        best = vals[np.arange(len(j)), j]
        lo = logt[np.maximum(j - 1, 0)]
        hi = logt[np.minimum(j + 1, n_grid - 1)]
        a, b, m = a[:, 0], b[:, 0], m[:, 0]

        def h(u):
            tt = np.exp(u)
            return rate_fn(a * tt, b * tt, m) / tt

        # vectorised golden-section search on log t
        for _ in range(iters):
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            left = h(x1) >= h(x2)
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
        out[s:s + chunk] = np.maximum(best, h(0.5 * (lo + hi)))
    return out.reshape(shape) if shape else float(out[0])


# ---------------------------------------------------------------------------
# outer bounds and regions


def outer_region(kind: str, pc: PowerConfig) -> Region:
    """Strong-interference outer bound for the given channel model.

    The bounds are limits as the interference variance grows; finite
    variance corrections are not modelled.
    """
    p1, p2, n = pc.p1, pc.p2, pc.n
    if kind == "single":
        cons = [Constraint((0.0, 1.0), cap(min(p1, p2) / n)), Constraint((1.0, 1.0), cap(p1 / n))]
        notes = {}
        if p1 > p2:
            notes["corner"] = single_dirty_corner(pc)
        return Region.from_constraints(cons, "outer_single", **notes)
    if kind == "doubly":
        return Region.from_constraints([Constraint((1.0, 1.0), cap(min(p1, p2) / n))], "outer_doubly")
    if kind == "common":
        return common_interference_region(pc)
    if kind == "k_user":
        k = pc.k or 2
        return Region.from_constraints([Constraint((1.0,) * k, cap(p1 / n))], "outer_k_user")
    raise ConfigError(f"unknown channel kind {kind!r}")


def single_dirty_corner(pc: PowerConfig) -> tuple:
    """Corner of the single-informed-user outer bound (meaningful for P1 > P2)."""
    r1 = 0.5 * math.log2((pc.p1 + pc.n) / (pc.p2 + pc.n))
    return (r1, cap(pc.p2 / pc.n))


def common_interference_region(pc: PowerConfig) -> Region:
    """Interference-free Gaussian MAC pentagon with its two corner points."""
    p1, p2, n = pc.p1, pc.p2, pc.n
    cons = [
        Constraint((1.0, 0.0), cap(p1 / n)),
        Constraint((0.0, 1.0), cap(p2 / n)),
        Constraint((1.0, 1.0), cap((p1 + p2) / n)),
    ]
    c1 = (cap(p1 / (p2 + n)), cap(p2 / n))
    c2 = (cap(p1 / n), cap(p2 / (p1 + n)))
    return Region.from_constraints(cons, "common", corner_user1_first=c1, corner_user2_first=c2)


# ---------------------------------------------------------------------------
# doubly dirty MAC


def full_rate_condition(p1, p2, n):
    """Regime where the outer sum-rate bound is achieved."""
    p1, p2, n = (np.asarray(a, dtype=float) for a in (p1, p2, n))
    return n <= np.sqrt(p1 * p2) - np.minimum(p1, p2)


def helper_aligned_rate_raw(p1, p2, n):
    """Pre-clamp sum rate of the two-sided MMSE scheme with aligned lattices."""
    p1, p2, n = (np.asarray(a, dtype=float) for a in (p1, p2, n))
    return 0.5 * np.log2((p1 + p2 + n) / (2 * n + (np.sqrt(p1) - np.sqrt(p2)) ** 2))


def doubly_point_rate(p1, p2, n):
    """Best single-point sum rate: full capacity in the full-rate regime, else the aligned scheme."""
    p1, p2, n = (np.asarray(a, dtype=float) for a in (p1, p2, n))
    full = cap(np.minimum(p1, p2) / n)
    return np.where(full_rate_condition(p1, p2, n), full, np.maximum(helper_aligned_rate_raw(p1, p2, n), 0.0))


@dataclass(frozen=True)
class Bound:
    """A rate bound: ``value`` after envelope and clamp, ``raw`` before both."""

    value: float
    raw: float
    clamped: bool


def inner_doubly(pc: PowerConfig, mode: str = "aligned_mmse") -> Bound:
    """Achievable sum rate for the doubly dirty MAC.

    Modes: ``high_snr`` (``0.5*log2(min/N)``), ``full_rate`` (capacity, only in
    its regime), ``aligned_mmse`` (time-shared two-sided MMSE scheme), ``symmetric``
    (envelope of ``[0.5*log2(1/2 + P/N)]^+`` with ``P = min(P1, P2)``) and
    ``one_dim`` (the symmetric bound minus the scalar-lattice shaping loss).
    """
    p1, p2, n = pc.p1, pc.p2, pc.n
    pm = min(p1, p2)
    if mode == "high_snr":
        c = positive_part(0.5 * math.log2(pm / n))
        return Bound(c.value, c.raw, c.clamped)
    if mode == "full_rate":
        if not full_rate_condition(p1, p2, n):
            raise ModeError("full sum rate requires N <= sqrt(P1*P2) - min(P1, P2)")
        v = cap(pm / n)
        return Bound(v, v, False)
    if mode == "aligned_mmse":
        raw = float(helper_aligned_rate_raw(p1, p2, n))
        if full_rate_condition(p1, p2, n):
            v = cap(pm / n)
            return Bound(v, raw, False)
        env = timeshare_envelope(doubly_point_rate, p1, p2, n)
        return Bound(min(float(env), cap(pm / n)), raw, raw < 0)
    if mode == "symmetric":
        raw = 0.5 * math.log2(0.5 + pm / n)
        return Bound(float(chord_envelope(pm / n)), raw, raw < 0)
    if mode == "one_dim":
        raw = 0.5 * math.log2(0.5 + pm / n) - SHAPING_LOSS_1D
        return Bound(float(chord_envelope(pm / n, 0.5, SHAPING_LOSS_1D)), raw, raw < 0)
    raise ModeError(f"unknown mode {mode!r}")


def inner_region_doubly(pc: PowerConfig, mode: str = "aligned_mmse") -> Region:
    return Region.from_constraints([Constraint((1.0, 1.0), inner_doubly(pc, mode).value)], f"inner_doubly_{mode}")


def gap_zeta(p1, p2, n):
    """Gap between the outer sum-rate bound and the time-shared inner bound.

    Exactly zero in the regime ``N <= sqrt(P1 P2) - min(P1, P2)``.
    Broadcasts over arrays.
    """
    p1, p2, n = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (p1, p2, n)))
    outer = np.asarray(cap(np.minimum(p1, p2) / n), dtype=float)
    full = full_rate_condition(p1, p2, n)
    gap = np.zeros(p1.shape)
    todo = ~full
    if np.any(todo):
        env = timeshare_envelope(doubly_point_rate, p1[todo], p2[todo], n[todo])
        gap[todo] = np.maximum(outer[todo] - env, 0.0)
    return gap if gap.ndim else float(gap)


def zeta_symmetric(x):
    """``gap_zeta(P, P, N)`` in closed form as a function of ``x = P/N``."""
    return cap(x) - chord_envelope(x)


class Supremum(NamedTuple):
    value: float
    argmax: float
    closed_form: float
    closed_argmax: float


def _grid_then_refine(fn, lo: float, hi: float, n: int = 4001) -> tuple[float, float]:
    x = np.linspace(lo, hi, n)
    y = fn(x)
    j = int(np.argmax(y))
    a, b = x[max(j - 1, 0)], x[min(j + 1, n - 1)]
    res = optimize.minimize_scalar(lambda t: -float(fn(np.array(t))), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-12})
    if -res.fun >= y[j]:
        return float(-res.fun), float(res.x)
    return float(y[j]), float(x[j])


def zeta_supremum() -> Supremum:
    """Largest gap ``zeta(P, P)`` over ``P/N``, numerically and in closed form."""
    xs = tangent_point()
    val, arg = _grid_then_refine(zeta_symmetric, 1e-6, 10.0)
    return Supremum(val, arg, math.log2(0.5 + xs) / (4 * xs), xs - 0.5)


# ---------------------------------------------------------------------------
# single informed user (helper problem) and its region


def helper_mmse_rate_raw(p1, p2, n):
    """Pre-envelope helper rate of the MMSE helper scheme."""
    p1, p2, n = (np.asarray(a, dtype=float) for a in (p1, p2, n))
    return 0.5 * np.log2(1.0 + 4 * p1 * p2 / ((p2 - p1 + n) ** 2 + 4 * p1 * n))


def helper_capacity_regime(p1, p2, n):
    p1, p2, n = (np.asarray(a, dtype=float) for a in (p1, p2, n))
    return n <= np.abs(p1 - p2)


def helper_point_rate(p1, p2, n):
    """Best single-point helper rate: capacity in its regime, else the MMSE helper scheme."""
    p1, p2, n = (np.asarray(a, dtype=float) for a in (p1, p2, n))
    full = cap(np.minimum(p1, p2) / n)
    return np.where(helper_capacity_regime(p1, p2, n), full, helper_mmse_rate_raw(p1, p2, n))


@dataclass(frozen=True)
class HelperRates:
    outer: float
    inner: float
    inner_raw: float
    capacity: float | None
    sandwich_lower: float


def helper_sandwich_lower(p1, p2, n):
    p1, p2, n = (np.asarray(a, dtype=float) for a in (p1, p2, n))
    return cap((np.minimum(p1, p2) / n) * (np.maximum(p1, p2) / (p1 + n)))


def helper_rates(pc: PowerConfig) -> HelperRates:
    """Outer bound, time-shared inner bound and (when known) capacity of the helper problem."""
    p1, p2, n = pc.p1, pc.p2, pc.n
    outer = cap(pc.p_min / n)
    low = float(helper_sandwich_lower(p1, p2, n))
    if helper_capacity_regime(p1, p2, n):
        return HelperRates(outer, outer, outer, outer, low)
    raw = float(helper_mmse_rate_raw(p1, p2, n))
    env = float(timeshare_envelope(helper_point_rate, p1, p2, n))
    return HelperRates(outer, min(max(env, raw), outer), raw, None, low)


def gap_eta(p1, p2, n, envelope: bool = True):
    """Gap between the helper outer bound and the helper inner bound.

    Zero exactly when ``N <= |P1 - P2|`` (capacity is known there).  With
    ``envelope=False`` the inner bound is taken before time sharing.
    """
    p1, p2, n = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (p1, p2, n)))
    outer = np.asarray(cap(np.minimum(p1, p2) / n), dtype=float)
    full = helper_capacity_regime(p1, p2, n)
    gap = np.zeros(p1.shape)
    todo = ~full
    if np.any(todo):
        if envelope:
            inner = timeshare_envelope(helper_point_rate, p1[todo], p2[todo], n[todo])
            inner = np.maximum(inner, helper_mmse_rate_raw(p1[todo], p2[todo], n[todo]))
        else:
            inner = helper_mmse_rate_raw(p1[todo], p2[todo], n[todo])
        gap[todo] = np.maximum(outer[todo] - inner, 0.0)
    return gap if gap.ndim else float(gap)


def eta_symmetric(x):
    """Pre-envelope helper gap at ``P1 = P2``, as a function of ``x = P/N``."""
    x = np.asarray(x, dtype=float)
    return cap(x) - 0.5 * np.log2(1.0 + 4 * x * x / (4 * x + 1))


def eta_supremum() -> Supremum:
    """Largest pre-envelope helper gap over ``P_min/N``."""
    val, arg = _grid_then_refine(eta_symmetric, 1e-6, 10.0)
    return Supremum(val, arg, 0.5 * math.log2(9.0 / 8.0), 0.5)


@dataclass(frozen=True)
class TimeShare:
    delta: float
    rate: float
    slope: float


def helper_timeshare_rate(delta, snr):
    """Rate of the low-SNR helper scheme that is active a fraction ``1/delta`` of the time."""
    u = np.asarray(delta, dtype=float) * snr
    return np.log2(u * (1 + u)) / (4 * np.asarray(delta, dtype=float))


def helper_low_snr_timeshare(pc: PowerConfig) -> TimeShare:
    """Optimal duty factor ``delta >= 1`` of the low-SNR helper scheme.

    Golden-section maximisation over ``delta``; the returned slope is the
    optimal rate divided by the SNR, constant throughout the feasible range.
    """
    if pc.p1 != pc.p2:
        raise ConfigError("the low-SNR helper scheme assumes equal powers")
    snr = pc.p1 / pc.n
    u_star = solve_u_star()
    if snr > u_star:
        raise ModeError(f"duty factor would fall below 1 for SNR {snr:.4g} > {u_star:.4g}")
    hi = 50.0 * u_star / snr
    res = optimize.minimize_scalar(lambda d: -helper_timeshare_rate(d, snr), bounds=(1.0, hi),
                                   method="bounded", options={"xatol": 1e-12 * hi})
    d = float(res.x)
    rate = float(helper_timeshare_rate(d, snr))
    return TimeShare(d, rate, rate / snr)


def _alpha_rate_point(alpha, p1, p2, n):
    a = (1 - alpha) ** 2 * p1 + alpha**2 * (n + p2)
    b = (1 - alpha) ** 2 * p1 + alpha**2 * n
    m = np.minimum(p1, a)
    return 0.5 * np.log2(p1 / m), 0.5 * np.log2(m / b)


def single_dirty_rates(alpha, pc: PowerConfig) -> tuple:
    """Rate pair of the single-informed-user scheme at a given MMSE factor."""
    r1, r2 = _alpha_rate_point(np.asarray(alpha, dtype=float), pc.p1, pc.p2, pc.n)
    return r1, r2


def region_single_dirty(pc: PowerConfig, alphas=None) -> Region:
    """Achievable region for the MAC with one informed user.

    Convex hull over the MMSE factor of the per-factor rate pairs, with user
    2 either at full power or silent, plus the axes.  Special points are
    recorded in ``notes``.
    """
    p1, p2, n = pc.p1, pc.p2, pc.n
    if alphas is None:
        alphas = np.linspace(0.0, 1.0, 801)
    alphas = np.asarray(alphas, dtype=float)
    if np.any((alphas < 0) | (alphas > 1)):
        raise ValueError("MMSE factors must lie in [0, 1]")
    a_star = p1 / (p1 + n)
    alphas = np.unique(np.concatenate([alphas, [a_star, 1.0, p1 / (p1 + p2 + n)]]))
    pts = []
    for q2 in (p2, 0.0):
        r1, r2 = _alpha_rate_point(alphas, p1, q2, n)
        pts.append(np.column_stack([r1, r2]))
    notes = {}
    r1s, r2s = _alpha_rate_point(a_star, p1, p2, n)
    notes["r_star"] = (float(r1s), float(r2s))
    if p2 + n < p1:
        notes["r_circ"] = (0.5 * math.log2(p1 / (p2 + n)), cap(p2 / n))
    notes["capacity_line"] = bool(p1 <= p2 - n)
    return Region.from_points(np.vstack(pts), "single_dirty_inner", **notes)


# ---------------------------------------------------------------------------
# other bounds


def binning_sum_bound(p1, p2, q1, q2, n):
    """High-SNR bound on the sum rate of Gaussian random binning.

    ``[h(S1+S2) - h(S1) - h(S2) - h(Z)]^+`` with Gaussian entropies.  The
    transmit powers drop out of this limit form.
    """
    q1, q2, n = (np.asarray(a, dtype=float) for a in (q1, q2, n))
    val = gaussian_entropy(q1 + q2) - gaussian_entropy(q1) - gaussian_entropy(q2) - gaussian_entropy(n)
    out = np.maximum(val, 0.0)
    return out if out.ndim else float(out)


def binning_sum_rate(p1, p2, q1, q2, n):
    """Exact Gaussian value of the random-binning sum rate with ``U_i = X_i + S_i``."""
    p1, p2, q1, q2, n = (np.asarray(a, dtype=float) for a in (p1, p2, q1, q2, n))
    val = (gaussian_entropy(p1) + gaussian_entropy(p2) + gaussian_entropy(p1 + p2 + q1 + q2 + n)
           - gaussian_entropy(n) - gaussian_entropy(p1 + q1) - gaussian_entropy(p2 + q2))
    out = np.maximum(val, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KUserBounds:
    outer: float
    inner: float
    inner_raw: float


def k_user_bounds(k: int, p: float, n: float) -> KUserBounds:
    """Sum-rate bounds for the symmetric K-user doubly dirty MAC."""
    if int(k) != k or k < 2:
        raise ConfigError(f"user count must be an integer >= 2, got {k}")
    x = p / n
    raw = 0.5 * math.log2(1.0 / k + x)
    return KUserBounds(cap(x), float(chord_envelope(x, 1.0 / k)), raw)


# ---------------------------------------------------------------------------
# root equations


def tangency_residual(x: float) -> float:
    return x / (x + 0.5) - math.log(x + 0.5)


def duty_residual(u: float) -> float:
    return 1 + u / (1 + u) - math.log(u + u * u)


def solve_x_star() -> float:
    return bisect(tangency_residual, 1.0, 3.0)


def solve_u_star() -> float:
    return bisect(duty_residual, 1.0, 3.0)


def _snr_star() -> float:
    # same point, found from the slope condition f'(s) * s = f(s)
    f = lambda s: 0.5 * math.log2(0.5 + s)  # noqa: E731
    df = lambda s: 0.5 * LOG2E / (0.5 + s)  # noqa: E731
    return bisect(lambda s: df(s) * s - f(s), 1.0, 3.0)


@dataclass(frozen=True)
class RootReport:
    x_star: float
    x_residual: float
    snr_star: float
    snr_residual: float
    u_star: float
    u_residual: float
    helper_slope: float
    outer_slope: float
    inner_slope_derived: float
    inner_slope_stated: float

    @property
    def gap_db_derived(self) -> float:
        return 10 * math.log10(self.outer_slope / self.inner_slope_derived)

    @property
    def gap_db_stated(self) -> float:
        return 10 * math.log10(self.outer_slope / self.inner_slope_stated)

    def lines(self) -> list[str]:
        return [
            f"x*   = {self.x_star:.12f}   residual {self.x_residual:.2e}",
            f"SNR* = {self.snr_star:.12f}   residual {self.snr_residual:.2e}",
            f"u*   = {self.u_star:.12f}   residual {self.u_residual:.2e}",
            f"helper low-SNR slope          = {self.helper_slope:.6f} bit per unit SNR",
            f"outer low-SNR slope           = {self.outer_slope:.6f} bit per unit SNR",
            f"symmetric inner slope (chord) = {self.inner_slope_derived:.6f}  ({self.gap_db_derived:.2f} dB below outer)",
            f"symmetric inner slope (quoted)= {self.inner_slope_stated:.6f}  ({self.gap_db_stated:.2f} dB below outer)",
            "note: the quoted slope does not follow from the tangency chord; both are reported",
        ]


def solve_roots() -> RootReport:
    xs = solve_x_star()
    ss = _snr_star()
    us = solve_u_star()
    slope = math.log2(us * (1 + us)) / (4 * us)
    f_at = 0.5 * math.log2(0.5 + xs)
    return RootReport(
        x_star=xs, x_residual=abs(tangency_residual(xs)),
        snr_star=ss, snr_residual=abs(tangency_residual(ss)),
        u_star=us, u_residual=abs(duty_residual(us)),
        helper_slope=slope, outer_slope=0.5 * LOG2E,
        inner_slope_derived=f_at / xs, inner_slope_stated=STATED_LOW_SNR_SLOPE,
    )
