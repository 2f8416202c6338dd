"""Gaussian multiple-access channel models with additive interference.

Four models share the form ``Y = sum(X_i) + interference + Z``:

* ``doubly``: two users, each knows its own state, ``Y = X1 + X2 + S1 + S2 + Z``
* ``single``: only user 1 is informed, ``Y = X1 + X2 + S1 + Z``
* ``common``: both users know one shared state, ``Y = X1 + X2 + Sc + Z``
* ``k_user``: ``K`` users, each with its own state
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

CHANNEL_KINDS = ("doubly", "single", "common", "k_user")
ADVERSARIAL_PATTERNS = ("sawtooth", "ramp", "alternating")
STRONG_FACTOR = 1e4


class ConfigError(ValueError):
    """Invalid channel or scheme parameters."""


@dataclass(frozen=True)
class PowerConfig:
    """Power constraints ``p1``, ``p2`` and noise variance ``n``.

    ``k`` is the user count of the symmetric K-user model, in which every
    user has power ``p1`` (and ``p2 == p1``).
    """

    p1: float
    p2: float
    n: float
    k: int | None = None

    def __post_init__(self):
        for name in ("p1", "p2", "n"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be finite and positive, got {v!r}")
        if self.k is not None:
            if int(self.k) != self.k or self.k < 2:
                raise ConfigError(f"user count must be an integer >= 2, got {self.k!r}")
            if self.p1 != self.p2:
                raise ConfigError("the K-user model uses a common power")

    @classmethod
    def symmetric(cls, p: float, n: float = 1.0, k: int | None = None) -> "PowerConfig":
        return cls(p, p, n, k)

    @property
    def p_min(self) -> float:
        return min(self.p1, self.p2)

    @property
    def p_max(self) -> float:
        return max(self.p1, self.p2)

    def swapped(self) -> "PowerConfig":
        return PowerConfig(self.p2, self.p1, self.n, self.k)

    def strong_variance(self, factor: float = STRONG_FACTOR) -> float:
        """Default "strong" interference variance, ``factor * max(P1, P2)``."""
        return factor * self.p_max


@dataclass(frozen=True)
class InterferenceSpec:
    """How an interference sequence is generated.

    Use the constructors :meth:`gaussian`, :meth:`fixed` and
    :meth:`adversarial` rather than filling the fields by hand.
    """

    kind: str
    variance: float = 0.0
    values: tuple = ()
    pattern: str = "sawtooth"
    amplitude: float = 0.0
    period: float = math.e**2  # samples per sawtooth tooth, irrational on purpose

    def __post_init__(self):
        if self.kind not in ("gaussian", "fixed", "adversarial"):
            raise ConfigError(f"unknown interference kind {self.kind!r}")
        if not self.variance >= 0:
            raise ConfigError("interference variance must be >= 0")
        if self.kind == "adversarial" and self.pattern not in ADVERSARIAL_PATTERNS:
            raise ConfigError(f"unknown adversarial pattern {self.pattern!r}")

    @classmethod
    def gaussian(cls, variance: float) -> "InterferenceSpec":
        return cls("gaussian", variance=float(variance))

    @classmethod
    def fixed(cls, values: Sequence[float]) -> "InterferenceSpec":
        return cls("fixed", values=tuple(float(v) for v in values))

    @classmethod
    def adversarial(cls, pattern: str = "sawtooth", amplitude: float = 1e3) -> "InterferenceSpec":
        return cls("adversarial", pattern=pattern, amplitude=float(amplitude))


def draw_state(spec: InterferenceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Length-``n`` interference sequence.

    Adversarial patterns are deterministic: ``sawtooth`` sweeps
    ``[-A, A)`` with a period of ``spec.period`` samples, ``ramp`` is a
    constant offset ``A/2`` plus a linear climb to ``3A/2``, and
    ``alternating`` flips between ``+A`` and ``-A``.
    """
    if n < 1:
        raise ConfigError("sequence length must be >= 1")
    if spec.kind == "gaussian":
        if spec.variance == 0:
            return np.zeros(n)
        return rng.normal(0.0, math.sqrt(spec.variance), size=n)
    if spec.kind == "fixed":
        if len(spec.values) != n:
            raise ConfigError(f"fixed sequence has length {len(spec.values)}, expected {n}")
        return np.array(spec.values, dtype=float)
    i = np.arange(n, dtype=float)
    a = spec.amplitude
    if spec.pattern == "sawtooth":
        return a * (2.0 * np.mod(i / spec.period, 1.0) - 1.0)
    if spec.pattern == "ramp":
        return a * (0.5 + i / max(n - 1, 1))
    return a * np.where(i % 2 == 0, 1.0, -1.0)


def _arity(kind: str, k: int | None) -> tuple[int, int]:
    if kind == "doubly":
        return 2, 2
    if kind in ("single", "common"):
        return 2, 1
    if kind == "k_user":
        if k is None or k < 2:
            raise ConfigError("k_user needs at least two inputs")
        return k, k
    raise ConfigError(f"unknown channel kind {kind!r}")


def channel_output(kind: str, xs: Sequence, ss: Sequence, z) -> np.ndarray:
    """Received signal for the selected channel model.

    ``xs`` are the user inputs, ``ss`` the interference sequences (two for
    ``doubly``, one for ``single`` and ``common``, ``K`` for ``k_user``)
    and ``z`` the noise.
    """
    xs = [np.asarray(x, dtype=float) for x in xs]
    ss = [np.asarray(s, dtype=float) for s in ss]
    z = np.asarray(z, dtype=float)
    nx, ns = _arity(kind, len(xs) if kind == "k_user" else None)
    if len(xs) != nx or len(ss) != ns:
        raise ConfigError(f"{kind} channel takes {nx} inputs and {ns} states, got {len(xs)} and {len(ss)}")
    shape = z.shape
    for v in xs + ss:
        if v.shape != shape:
            raise ConfigError(f"length mismatch: {v.shape} vs {shape}")
    y = z.copy()
    for v in xs + ss:
        y = y + v
    return y


@dataclass(frozen=True)
class Decomposition:
    """Independent-component form of two correlated Gaussian states.

    ``S1~ = S1 + beta1 * S0`` and ``S2~ = S2 + beta2 * S0`` with
    ``S0, S1, S2`` independent, zero-mean, standard deviations
    ``sigma_s0``, ``sigma_s1``, ``sigma_s2``.
    """

    sigma_s1: float
    sigma_s2: float
    beta1: float
    beta2: float
    sigma_s0: float

    def covariance(self) -> np.ndarray:
        v0 = self.sigma_s0**2
        return np.array([
            [self.sigma_s1**2 + self.beta1**2 * v0, self.beta1 * self.beta2 * v0],
            [self.beta1 * self.beta2 * v0, self.sigma_s2**2 + self.beta2**2 * v0],
        ])

    def draw(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        s0 = rng.normal(0.0, self.sigma_s0, n)
        s1 = rng.normal(0.0, self.sigma_s1, n)
        s2 = rng.normal(0.0, self.sigma_s2, n)
        return s1 + self.beta1 * s0, s2 + self.beta2 * s0


def correlated_decompose(sigma1: float, sigma2: float, rho: float) -> Decomposition:
    """Split jointly Gaussian states with correlation ``rho`` into a shared part.

    The private parts keep the fraction ``1 - |rho|`` of each variance and
    the shared part ``S0`` has the variance of the first state.
    """
    if not (sigma1 > 0 and sigma2 > 0):
        raise ConfigError("state standard deviations must be positive")
    if not abs(rho) < 1:
        raise ConfigError(f"correlation must satisfy |rho| < 1, got {rho}")
    r = abs(rho)
    return Decomposition(
        sigma_s1=sigma1 * math.sqrt(1 - r),
        sigma_s2=sigma2 * math.sqrt(1 - r),
        beta1=math.copysign(math.sqrt(r), rho) if rho != 0 else 0.0,
        beta2=(sigma2 / sigma1) * math.sqrt(r),
        sigma_s0=sigma1,
    )


def target_covariance(sigma1: float, sigma2: float, rho: float) -> np.ndarray:
    c = rho * sigma1 * sigma2
    return np.array([[sigma1**2, c], [c, sigma2**2]])
