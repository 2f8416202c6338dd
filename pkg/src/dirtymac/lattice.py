"""Lattices, nearest-point quantization, modulo reduction and dithers.

A lattice is stored by its generator matrix ``G`` (columns are basis
vectors), so that the lattice is ``{G @ i : i integer}``.  One-dimensional
lattices ``delta * Z`` take a fast path and accept arrays of any shape, each
entry being one scalar sample.  Matrix lattices accept arrays whose last
axis has length ``n``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

NEST_TOL = 1e-9
MAX_DIM = 8


class LatticeError(ValueError):
    """Raised on malformed lattices or inputs."""


@dataclass(frozen=True, eq=False)
class Lattice:
    """Lattice with generator matrix ``generator`` (n x n, nonsingular)."""

    generator: np.ndarray

    def __post_init__(self):
        g = np.array(self.generator, dtype=float)
        if g.ndim == 0:
            g = g.reshape(1, 1)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise LatticeError(f"generator must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise LatticeError("generator has non-finite entries")
        if abs(np.linalg.det(g)) <= 0.0:
            raise LatticeError("generator is singular")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)

    @classmethod
    def scalar(cls, delta: float) -> "Lattice":
        """The one-dimensional lattice ``delta * Z``."""
        if not np.isfinite(delta) or delta <= 0:
            raise LatticeError(f"scale must be positive, got {delta}")
        return cls(np.array([[float(delta)]]))

    @classmethod
    def from_second_moment(cls, power: float) -> "Lattice":
        """Scalar lattice whose Voronoi cell has second moment ``power``."""
        if not np.isfinite(power) or power <= 0:
            raise LatticeError(f"power must be positive, got {power}")
        return cls.scalar(np.sqrt(12.0 * power))

    @classmethod
    def integer(cls, n: int) -> "Lattice":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.generator.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.n == 1

    @property
    def delta(self) -> float:
        """Scale of a one-dimensional lattice."""
        if not self.is_scalar:
            raise LatticeError("delta is only defined for 1-D lattices")
        return abs(float(self.generator[0, 0]))

    @cached_property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.generator)))

    @cached_property
    def second_moment(self) -> float:
        """Per-dimension second moment of the Voronoi cell.

        Exact for 1-D lattices and for orthogonal bases (the cell is then a
        box); a seeded Monte Carlo estimate otherwise.
        """
        if self.is_scalar:
            return self.delta**2 / 12.0
        gram = self.generator.T @ self.generator
        off = gram - np.diag(np.diag(gram))
        if np.all(np.abs(off) <= 1e-12 * np.max(np.abs(gram))):
            return float(np.trace(gram) / (12.0 * self.n))
        return second_moment(self, 200_000, np.random.default_rng(0)).value

    @cached_property
    def normalized_second_moment(self) -> float:
        return self.second_moment / self.volume ** (2.0 / self.n)

    def scaled(self, c: float) -> "Lattice":
        """The lattice ``c * self``."""
        if c == 0 or not np.isfinite(c):
            raise LatticeError(f"scale factor must be finite and nonzero, got {c}")
        return Lattice(self.generator * c)

    def quantize(self, x):
        return nearest_point(self, x)

    def mod(self, x):
        return mod_lattice(self, x)

    def __repr__(self):
        if self.is_scalar:
            return f"Lattice.scalar({self.delta!r})"
        return f"Lattice({self.generator.tolist()!r})"


def _check_input(lat: Lattice, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise LatticeError("input has non-finite entries")
    if not lat.is_scalar:
        if x.ndim == 0 or x.shape[-1] != lat.n:
            raise LatticeError(f"expected last axis of length {lat.n}, got shape {x.shape}")
        if lat.n > MAX_DIM:
            raise LatticeError(f"matrix lattices limited to n <= {MAX_DIM}")
    return x


def _scalar_index(x: np.ndarray, delta: float) -> np.ndarray:
    # Cell is (-delta/2, delta/2]; exact ties go to the smaller index.
    half = 0.5 * delta
    k = np.ceil(x / delta - 0.5)
    # Repair rounding so that x - k*delta lands in the half-open cell as
    # evaluated in floating point; this keeps mod idempotent bit-for-bit.
    for _ in range(3):
        r = x - k * delta
        k = np.where(r > half, k + 1, np.where(r <= -half, k - 1, k))
    return k


_OFFSETS: dict[int, np.ndarray] = {}


def _offsets(n: int) -> np.ndarray:
    # Lexicographic order, so the first minimizer is the lexicographically
    # smallest integer vector among equidistant candidates.
    if n not in _OFFSETS:
        _OFFSETS[n] = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=float)
    return _OFFSETS[n]


def _matrix_index(lat: Lattice, x: np.ndarray) -> np.ndarray:
    g = lat.generator
    n = lat.n
    flat = x.reshape(-1, n)
    ginv = np.linalg.inv(g)
    offs = _offsets(n)
    out = np.empty_like(flat)
    chunk = max(1, 2**21 // (len(offs) * n))
    for start in range(0, len(flat), chunk):
        xs = flat[start:start + chunk]
        base = np.round(xs @ ginv.T)
        cand = base[:, None, :] + offs[None, :, :]
        diff = xs[:, None, :] - cand @ g.T
        d = np.einsum("bkn,bkn->bk", diff, diff)
        dmin = d.min(axis=1, keepdims=True)
        tol = 1e-12 * np.maximum(1.0, dmin)
        first = np.argmax(d <= dmin + tol, axis=1)
        out[start:start + chunk] = cand[np.arange(len(xs)), first]
    return out.reshape(x.shape)


def nearest_index(lat: Lattice, x) -> np.ndarray:
    """Integer coordinates of the nearest lattice point."""
    x = _check_input(lat, x)
    if lat.is_scalar:
        k = _scalar_index(x, lat.delta)
        return k if lat.generator[0, 0] > 0 else -k
    return _matrix_index(lat, x)


def nearest_point(lat: Lattice, x) -> np.ndarray:
    """Nearest lattice point to ``x``.

    Ties are broken towards the lexicographically smallest integer
    coordinate vector.  Matrix lattices (n <= 8) search the 3^n integer
    neighbourhood of the rounded Babai point.
    """
    x = _check_input(lat, x)
    if lat.is_scalar:
        return _scalar_index(x, lat.delta) * lat.delta
    return _matrix_index(lat, x) @ lat.generator.T


def mod_lattice(lat: Lattice, x) -> np.ndarray:
    """``x - Q(x)``, the representative of ``x`` in the fundamental cell."""
    x = _check_input(lat, x)
    if lat.is_scalar:
        d = lat.delta
        return x - _scalar_index(x, d) * d
    return x - _matrix_index(lat, x) @ lat.generator.T


def in_voronoi(lat: Lattice, x) -> np.ndarray:
    """Boolean mask: does ``x`` quantize to the origin?"""
    k = nearest_index(lat, x)
    if lat.is_scalar:
        return k == 0
    return np.all(k == 0, axis=-1)


def sample_dither(lat: Lattice, size, rng: np.random.Generator, max_rounds: int = 1000) -> np.ndarray:
    """Draw ``size`` dither vectors uniform over the fundamental Voronoi cell.

    1-D samples are uniform on the cell; matrix lattices use rejection from
    the bounding box of radius half the sum of the basis vector lengths.
    """
    size = (size,) if np.isscalar(size) else tuple(size)
    if lat.is_scalar:
        d = lat.delta
        u = rng.uniform(-0.5 * d, 0.5 * d, size=size)
        # the cell is (-d/2, d/2]; move the measure-zero left endpoint over
        return np.where(u <= -0.5 * d, 0.5 * d, u)
    n = lat.n
    count = int(np.prod(size))
    radius = 0.5 * np.linalg.norm(lat.generator, axis=0).sum()
    accept_rate = lat.volume / (2 * radius) ** n
    batch = max(1024, int(1.2 * count / max(accept_rate, 1e-6)))
    batch = min(batch, 2**20)
    kept: list[np.ndarray] = []
    have = 0
    for _ in range(max_rounds):
        if have >= count:
            break
        cand = rng.uniform(-radius, radius, size=(batch, n))
        ok = cand[in_voronoi(lat, cand)]
        kept.append(ok)
        have += len(ok)
    else:
        if have < count:
            raise LatticeError("dither rejection sampling exceeded its iteration cap")
    return np.concatenate(kept)[:count].reshape(size + (n,))


class MomentEstimate(NamedTuple):
    value: float
    stderr: float


def second_moment(lat: Lattice, n_samples: int, rng: np.random.Generator) -> MomentEstimate:
    """Per-dimension second moment; exact for 1-D, Monte Carlo otherwise."""
    if lat.is_scalar:
        return MomentEstimate(lat.delta**2 / 12.0, 0.0)
    if n_samples < 10_000:
        raise LatticeError("Monte Carlo second moment needs at least 1e4 samples")
    u = sample_dither(lat, n_samples, rng)
    per = np.sum(u * u, axis=-1) / lat.n
    return MomentEstimate(float(per.mean()), float(per.std(ddof=1) / np.sqrt(n_samples)))


class Nesting(NamedTuple):
    nested: bool
    witness: object  # int scale for 1-D, integer matrix otherwise, or None


def is_nested(coarse: Lattice, fine: Lattice, tol: float = NEST_TOL) -> Nesting:
    """Is ``coarse`` a sublattice of ``fine``?

    True iff ``inv(G_f) @ G_c`` is an integer matrix within ``tol``.
    """
    if coarse.n != fine.n:
        raise LatticeError("lattices have different dimensions")
    m = np.linalg.solve(fine.generator, coarse.generator)
    mi = np.round(m)
    ok = bool(np.all(np.abs(m - mi) <= tol * np.maximum(1.0, np.abs(m))))
    ok = ok and abs(np.linalg.det(mi)) > 0.5
    if not ok:
        return Nesting(False, None)
    if coarse.is_scalar:
        return Nesting(True, int(abs(mi[0, 0])))
    return Nesting(True, mi.astype(int))


@dataclass(frozen=True)
class NestedPair:
    """A coarse lattice contained in a fine one."""

    coarse: Lattice
    fine: Lattice
    witness: object

    @classmethod
    def build(cls, coarse: Lattice, fine: Lattice) -> "NestedPair":
        res = is_nested(coarse, fine)
        if not res.nested:
            raise LatticeError("coarse lattice is not a sublattice of the fine lattice")
        return cls(coarse, fine, res.witness)

    @classmethod
    def scalar(cls, coarse_delta: float, ratio: int) -> "NestedPair":
        """``coarse_delta * Z`` inside ``(coarse_delta / ratio) * Z``."""
        return cls.build(Lattice.scalar(coarse_delta), Lattice.scalar(coarse_delta / ratio))

    def codebook(self) -> np.ndarray:
        """Fine points inside the coarse Voronoi cell (1-D only)."""
        if not self.coarse.is_scalar:
            raise LatticeError("codebook enumeration is implemented for 1-D pairs")
        m = self.witness
        pts = np.arange(m, dtype=float) * self.fine.delta
        return np.sort(mod_lattice(self.coarse, pts))

    def decode(self, y) -> np.ndarray:
        """Nearest codeword, reduced modulo the coarse lattice."""
        return mod_lattice(self.coarse, nearest_point(self.fine, y))
