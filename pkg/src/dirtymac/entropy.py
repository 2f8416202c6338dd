"""Grid densities, wrapping, convolution and differential entropy in 1-D.

A :class:`GridDensity` stores probability masses of bins of width ``h``
centred on integer multiples of ``h``.  Anchoring every grid at the origin
keeps sums of centres on the grid, so convolution needs no interpolation.
A wrapped density on period ``L = M h`` (``M`` even) has bins centred at
``-L/2 + k h`` for ``k = 0 .. M-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, special, stats

DEFAULT_BINS = 2**14
TRUNCATION = 8.0
MASS_TOL = 1e-9
MIN_MC_SAMPLES = 100_000


class DensityError(ValueError):
    """Incompatible or malformed grid densities."""


@dataclass(frozen=True, eq=False)
class GridDensity:
    h: float
    k0: int
    mass: np.ndarray
    period: float | None = None

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.ndim != 1 or len(m) == 0:
            raise DensityError("mass must be a nonempty 1-D array")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise DensityError("mass must be finite and nonnegative")
        if not self.h > 0:
            raise DensityError("bin width must be positive")
        object.__setattr__(self, "mass", m)

    @property
    def wrapped(self) -> bool:
        return self.period is not None

    @property
    def centers(self) -> np.ndarray:
        return (self.k0 + np.arange(len(self.mass))) * self.h

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def variance(self) -> float:
        c = self.centers
        mu = float(np.dot(self.mass, c))
        return float(np.dot(self.mass, (c - mu) ** 2))

    @property
    def edges(self) -> np.ndarray:
        return (self.k0 + np.arange(len(self.mass) + 1) - 0.5) * self.h

    def cdf(self, x) -> np.ndarray:
        """Piecewise-linear CDF (mass spread uniformly within each bin).

        For a wrapped density the support is ``[-L/2 - h/2, L/2 - h/2)``;
        use :meth:`to_support` to map samples onto it first.
        """
        edges = self.edges
        cum = np.concatenate([[0.0], np.cumsum(self.mass)])
        return np.interp(np.asarray(x, dtype=float), edges, cum)

    def to_support(self, x) -> np.ndarray:
        """Shift wrapped samples by one period so they fall on the bin support."""
        x = np.asarray(x, dtype=float)
        if not self.wrapped:
            return x
        return np.where(x >= self.edges[-1], x - self.period, x)


def _check_positive(name, v):
    if not (np.isfinite(v) and v > 0):
        raise DensityError(f"{name} must be positive and finite, got {v}")


def point_mass(h: float) -> GridDensity:
    return GridDensity(h, 0, np.array([1.0]))


def make_uniform(width: float, h: float) -> GridDensity:
    """Uniform density on ``[-width/2, width/2)`` with exact bin masses."""
    _check_positive("width", width)
    _check_positive("h", h)
    a, b = -0.5 * width, 0.5 * width
    k_lo = int(math.floor(a / h + 0.5))
    k_hi = int(math.ceil(b / h - 0.5))
    k = np.arange(k_lo, k_hi + 1)
    left = np.maximum((k - 0.5) * h, a)
    right = np.minimum((k + 0.5) * h, b)
    mass = np.clip(right - left, 0.0, None) / width
    return GridDensity(h, k_lo, mass / mass.sum())


def make_gaussian(sigma: float, h: float, truncation: float = TRUNCATION) -> GridDensity:
    """Zero-mean Gaussian, truncated at ``truncation * sigma`` and renormalised."""
    _check_positive("sigma", sigma)
    _check_positive("h", h)
    kmax = int(math.ceil(truncation * sigma / h))
    k = np.arange(-kmax, kmax + 1)
    lo = (k - 0.5) * h / sigma
    hi = (k + 0.5) * h / sigma
    # use the upper tail on the right to keep small masses accurate
    mass = np.where(k > 0, special.ndtr(-lo) - special.ndtr(-hi), special.ndtr(hi) - special.ndtr(lo))
    return GridDensity(h, -kmax, mass / mass.sum())


def _bins_per_period(period: float, h: float) -> int:
    m = period / h
    mi = int(round(m))
    if abs(m - mi) > 1e-9 * max(1.0, m) or mi % 2:
        raise DensityError(f"period {period} is not an even multiple of the bin width {h}")
    return mi


def wrap(d: GridDensity, period: float) -> GridDensity:
    """Fold the density onto one period ``[-L/2, L/2)``."""
    _check_positive("period", period)
    m = _bins_per_period(period, d.h)
    if d.wrapped:
        if abs(d.period - period) > 1e-9 * period:
            raise DensityError("density is already wrapped on a different period")
        return d
    k = d.k0 + np.arange(len(d.mass))
    idx = np.mod(k + m // 2, m)
    folded = np.bincount(idx, weights=d.mass, minlength=m)
    return GridDensity(d.h, -(m // 2), folded, float(period))


def _same_h(a: GridDensity, b: GridDensity):
    if abs(a.h - b.h) > 1e-12 * max(a.h, b.h):
        raise DensityError(f"bin widths differ: {a.h} vs {b.h}")


def _tidy(mass: np.ndarray) -> np.ndarray:
    mass = np.clip(mass, 0.0, None)
    return mass / mass.sum()


def convolve(a: GridDensity, b: GridDensity) -> GridDensity:
    """Density of the sum of independent variables.

    Linear convolution for two unwrapped grids; circular convolution when
    either operand is wrapped (the other is folded onto the same period
    first, which gives the same result as wrapping the linear sum).
    """
    _same_h(a, b)
    if a.wrapped or b.wrapped:
        period = a.period if a.wrapped else b.period
        a, b = wrap(a, period), wrap(b, period)
        m = len(a.mass)
        c = np.fft.irfft(np.fft.rfft(a.mass) * np.fft.rfft(b.mass), n=m)
        c = np.roll(c, -(m // 2))
        return GridDensity(a.h, -(m // 2), _tidy(c), period)
    c = signal.fftconvolve(a.mass, b.mass)
    return GridDensity(a.h, a.k0 + b.k0, _tidy(c))


def diff_entropy(d: GridDensity) -> float:
    """Differential entropy in bits, ``-sum p log2(p / h)``."""
    if abs(d.total - 1.0) > MASS_TOL:
        raise DensityError(f"density is not normalised (total mass {d.total!r})")
    p = d.mass[d.mass > 0]
    return float(-np.sum(p * np.log2(p / d.h)))


def wrapped_uniform_entropy(width: float, period: float) -> float:
    """Closed-form entropy of ``U[-w/2, w/2) mod L`` in bits."""
    _check_positive("width", width)
    _check_positive("period", period)
    m = math.floor(width / period)
    r = width - m * period
    if r <= 1e-12 * period:
        return math.log2(period)
    hi = (m + 1) / width
    out = -r * hi * math.log2(hi)
    if m > 0:
        lo = m / width
        out -= (period - r) * lo * math.log2(lo)
    return out


# ---------------------------------------------------------------------------
# equivalent-channel rates


def component_density(comp, h: float, truncation: float = TRUNCATION) -> GridDensity | None:
    """Grid density of a uniform or Gaussian noise component (None if degenerate)."""
    if comp.kind == "gaussian":
        if comp.variance == 0:
            return None
        return make_gaussian(math.sqrt(comp.variance), h, truncation)
    width = comp.width
    if width == 0:
        return None
    return make_uniform(width, h)


def sum_density(components, h: float, period: float | None = None,
                truncation: float = TRUNCATION) -> GridDensity:
    """Density of a sum of independent components, wrapped if ``period`` is given."""
    out = point_mass(h)
    if period is not None:
        out = wrap(out, period)
    for comp in components:
        d = component_density(comp, h, truncation)
        if d is None:
            continue
        if period is not None:
            d = wrap(d, period)
        out = convolve(out, d)
    return out


@dataclass(frozen=True)
class RateResult:
    rate: float
    raw: float
    clamped: bool
    degenerate: bool
    noise_entropy: float
    output_entropy: float


def rate_of_spec(spec, bins: int = DEFAULT_BINS, truncation: float = TRUNCATION) -> RateResult:
    """Information rate of a 1-D modulo-lattice equivalent channel.

    ``R = h([signal + noise] mod L) - h([noise] mod L)`` with ``L`` the scale
    of the wrap lattice.  When the signal is uniform over the fundamental
    cell the first term is ``log2 L``.
    """
    lat = spec.wrap
    if not lat.is_scalar or any(getattr(c, "lattice", lat).n != 1 for c in spec.all_components()):
        raise DensityError("rate_of_spec handles 1-D specs only")
    period = lat.delta
    h = period / bins
    noise = sum_density(spec.noise, h, period, truncation)
    h_noise = diff_entropy(noise)
    degenerate = all(c.variance == 0 for c in spec.noise)
    if spec.signal_is_cell_uniform():
        h_out = math.log2(period)
    else:
        h_out = diff_entropy(convolve(noise, sum_density(spec.signal, h, period, truncation)))
    raw = h_out - h_noise
    return RateResult(max(raw, 0.0), raw, raw < 0, degenerate, h_noise, h_out)


# ---------------------------------------------------------------------------
# Monte Carlo cross-checks


def mc_entropy(samples, bins: int = 512, period: float | None = None) -> float:
    """Plug-in histogram entropy estimate in bits with Miller-Madow correction.

    With ``period`` the histogram spans ``[-L/2, L/2]``; otherwise the
    sample range.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = len(x)
    if n < MIN_MC_SAMPLES:
        raise DensityError(f"need at least {MIN_MC_SAMPLES} samples, got {n}")
    if period is not None:
        lo, hi = -0.5 * period, 0.5 * period
    else:
        lo, hi = float(x.min()), float(x.max())
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    width = edges[1] - edges[0]
    p = counts[counts > 0] / n
    h_nats = -np.sum(p * np.log(p)) + (len(p) - 1) / (2.0 * n) + math.log(width)
    return float(h_nats / math.log(2.0))


def ks_to_density(samples, d: GridDensity) -> float:
    """Kolmogorov-Smirnov distance between samples and a grid density."""
    x = d.to_support(np.asarray(samples, dtype=float).ravel())
    return float(stats.kstest(x, d.cdf).statistic)


def ks_to_uniform(samples, period: float) -> float:
    return float(stats.kstest(np.asarray(samples).ravel(), "uniform", args=(-0.5 * period, period)).statistic)


def ks_two_sample(a, b) -> float:
    return float(stats.ks_2samp(np.asarray(a).ravel(), np.asarray(b).ravel()).statistic)
