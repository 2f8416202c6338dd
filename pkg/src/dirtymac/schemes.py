"""Dithered modulo-lattice transmission schemes and their equivalent channels.

Every user sends ``X_i = [V_i - a_i S_i + D_i] mod L_i`` and the receiver
forms ``Y' = [alpha_r Y - gamma D_1 - beta D_2] mod L_r``.  A preset fixes
the scalars and lattices for one of the constructions used in the analysis
and returns the symbolic equivalent channel(s) of the form

    output = [signal + noise] mod L_r

with independent uniform and Gaussian components, together with the
predicted asymptotic rate of each channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import entropy as en
from .channels import ConfigError, InterferenceSpec, PowerConfig, channel_output, draw_state
from .lattice import Lattice, LatticeError, NestedPair, in_voronoi, mod_lattice, sample_dither
from .rates import cap, gaussian_entropy, helper_mmse_rate_raw, single_dirty_rates

PRESETS = ("plain", "symmetric_mmse", "nested_helper", "aligned_mmse", "helper_capacity",
           "helper_mmse", "single_dirty", "common")
MIN_ALPHA = 1e-6
POWER_TOL = 1e-9


class PresetError(ConfigError):
    """A preset's validity condition does not hold; ``diagnostics`` says why."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# equivalent-channel components


@dataclass(frozen=True)
class Uniform:
    """``weight`` times a variable uniform over the Voronoi cell of ``lattice``."""

    lattice: Lattice
    weight: float
    kind = "uniform"

    def __post_init__(self):
        if not math.isfinite(self.weight):
            raise ConfigError("component weight must be finite")

    @property
    def variance(self) -> float:
        return self.weight**2 * self.lattice.second_moment

    @property
    def width(self) -> float:
        return abs(self.weight) * self.lattice.delta


@dataclass(frozen=True)
class Gaussian:
    variance: float
    kind = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.variance) and self.variance >= 0):
            raise ConfigError("Gaussian variance must be finite and >= 0")


@dataclass(frozen=True)
class EquivNoiseSpec:
    """Equivalent modulo channel ``[signal + noise] mod wrap``.

    ``taps`` gives the signal as ``sum(w * V_user)`` for simulation, and
    ``output`` names the receiver quantity the channel lives on: ``front``
    is the front-end output, ``genie`` removes ``V_1`` from it first and
    ``stage3`` is the last stage of the common-interference decoder.
    """

    wrap: Lattice
    noise: tuple
    signal: tuple
    taps: tuple = ()
    output: str = "front"
    label: str = ""

    def all_components(self) -> tuple:
        return tuple(self.noise) + tuple(self.signal)

    def noise_variance(self) -> float:
        """Per-dimension variance of the noise before the modulo."""
        return float(sum(c.variance for c in self.noise))

    def signal_is_cell_uniform(self) -> bool:
        # a uniform whose support is a whole number of wrap cells wraps to a uniform
        period = self.wrap.delta
        for c in self.signal:
            if c.kind == "uniform":
                k = c.width / period
                if k >= 1 - 1e-12 and abs(k - round(k)) <= 1e-9 * k:
                    return True
        return False

    def signal_entropy(self) -> float:
        """Entropy of the wrapped signal (single uniform term or cell-uniform sum)."""
        period = self.wrap.delta
        if self.signal_is_cell_uniform():
            return math.log2(period)
        if len(self.signal) != 1 or self.signal[0].kind != "uniform":
            raise ConfigError("closed-form signal entropy needs a single uniform term")
        return en.wrapped_uniform_entropy(self.signal[0].width, period)

    def lower_bound_1d(self) -> float:
        """``[h(signal mod L) - 0.5 log2(2 pi e var(noise))]^+`` for a 1-D wrap lattice.

        With a cell-uniform signal this is the Gaussian-noise rate minus
        the scalar shaping loss, ``0.5 log2(P_r / var) - 0.2546``.
        """
        return max(self.signal_entropy() - float(gaussian_entropy(self.noise_variance())), 0.0)


# ---------------------------------------------------------------------------
# scheme configuration


@dataclass(frozen=True, eq=False)
class SchemeConfig:
    """Fully resolved scalars and lattices of one scheme.

    ``enc_scale`` holds the state coefficients ``a_i`` used by the
    encoders; ``alpha1``/``alpha2`` are the MMSE factors they derive from.
    ``used_powers`` are the second moments actually assigned (a preset may
    run a user below its constraint).
    """

    name: str
    powers: PowerConfig
    channel: str
    lam1: Lattice
    lam2: Lattice
    lam_r: Lattice
    alpha1: float
    alpha2: float
    alpha_r: float
    beta: float
    gamma: float
    enc_scale: tuple
    dither: tuple
    send: tuple
    used_powers: tuple
    extras: dict = field(default_factory=dict)

    def lattice(self, user: int) -> Lattice:
        return self.lam1 if user == 1 else self.lam2


class Preset(NamedTuple):
    config: SchemeConfig
    channels: dict  # name -> EquivNoiseSpec; names are "sum", "R1" or "R2"
    predicted: dict  # name -> asymptotic rate of that channel
    outer: dict  # name -> outer bound on the same rate
    diagnostics: dict


def encode(v, s, d, alpha: float, lat: Lattice) -> np.ndarray:
    """``[v - alpha s + d] mod lat``; ``v`` must lie in the fundamental cell."""
    v = np.asarray(v, dtype=float)
    if not np.all(in_voronoi(lat, v)):
        raise LatticeError("message point outside the fundamental Voronoi cell")
    return mod_lattice(lat, v - alpha * np.asarray(s, dtype=float) + np.asarray(d, dtype=float))


def receive_front_end(y, cfg: SchemeConfig, d1=None, d2=None) -> np.ndarray:
    """``[alpha_r y - gamma d1 - beta d2] mod L_r``."""
    y = np.asarray(y, dtype=float)
    out = cfg.alpha_r * y
    for flag, coef, d, who in ((cfg.dither[0], cfg.gamma, d1, 1), (cfg.dither[1], cfg.beta, d2, 2)):
        if flag and coef != 0:
            if d is None:
                raise ConfigError(f"dither of user {who} is required by the front end")
            out = out - coef * np.asarray(d, dtype=float)
    return mod_lattice(cfg.lam_r, out)


# ---------------------------------------------------------------------------
# presets


def _check_alpha(name, a, diag):
    if not (MIN_ALPHA <= a <= 1 + 1e-12):
        diag["violated"] = f"{name} = {a:.6g} outside [{MIN_ALPHA:g}, 1]"
        return False
    return True


def _fail(preset, condition, diag):
    diag.setdefault("condition", condition)
    raise PresetError(f"{preset}: validity condition violated ({condition})", diag)


def _scaled(lat: Lattice, power: float) -> Lattice:
    return lat.scaled(math.sqrt(power / lat.second_moment))


def _base(name, pc, channel, lam1, lam2, lam_r, **kw) -> SchemeConfig:
    defaults = dict(alpha1=1.0, alpha2=1.0, alpha_r=1.0, beta=1.0, gamma=1.0, enc_scale=(1.0, 1.0),
                    dither=(True, True), send=(True, True),
                    used_powers=(lam1.second_moment, lam2.second_moment))
    defaults.update(kw)
    return SchemeConfig(name, pc, channel, lam1, lam2, lam_r, **defaults)


def _rate_from_var(p, var):
    return max(0.5 * math.log2(p / var), 0.0)


def _preset_plain(pc, base, dither=False, **_):
    p = pc.p_min
    lam = _scaled(base, p)
    cfg = _base("plain", pc, "doubly", lam, lam, lam, dither=(dither, dither),
                extras={"dithered": dither})
    spec = EquivNoiseSpec(lam, (Gaussian(pc.n),), (Uniform(lam, 1.0), Uniform(lam, 1.0)),
                          taps=((1, 1.0), (2, 1.0)), label="plain sum")
    pred = max(0.5 * math.log2(p / pc.n), 0.0)
    return cfg, {"sum": spec}, {"sum": pred}, {"sum": cap(p / pc.n)}, {}


def _preset_symmetric(pc, base, alpha=None, **_):
    p, n = pc.p_min, pc.n
    a = 2 * p / (2 * p + n) if alpha is None else float(alpha)
    diag = {"alpha": a, "alpha_opt": 2 * p / (2 * p + n)}
    if not _check_alpha("alpha", a, diag):
        _fail("symmetric_mmse", "0 < alpha <= 1", diag)
    lam = _scaled(base, p)
    cfg = _base("symmetric_mmse", pc, "doubly", lam, lam, lam, alpha1=a, alpha2=a, alpha_r=a,
                enc_scale=(a, a))
    noise = [Uniform(lam, -(1 - a)), Uniform(lam, -(1 - a)), Gaussian(a * a * n)]
    noise = tuple(c for c in noise if c.variance > 0)
    spec = EquivNoiseSpec(lam, noise, (Uniform(lam, 1.0), Uniform(lam, 1.0)),
                          taps=((1, 1.0), (2, 1.0)), label="symmetric sum")
    var = a * a * n + 2 * (1 - a) ** 2 * p
    return cfg, {"sum": spec}, {"sum": _rate_from_var(p, var)}, {"sum": cap(p / n)}, diag


def _preset_nested_helper(pc, base, **_):
    p1, p2, n = pc.p1, pc.p2, pc.n
    bound = math.sqrt(p1 * p2) - pc.p_min
    diag = {"noise_limit": bound}
    if n > bound * (1 + 1e-12):
        _fail("nested_helper", "N <= sqrt(P1*P2) - min(P1, P2)", diag)
    out = {"R2": cap(pc.p_min / n)}
    if p1 >= p2:
        a2 = p2 / (p2 + n)
        lam2 = _scaled(base, p2)
        lam1 = lam2.scaled(1.0 / a2)
        diag.update(alpha2=a2, branch="p1>=p2", nesting="lam2 = alpha2 * lam1")
        cfg = _base("nested_helper", pc, "doubly", lam1, lam2, lam2, alpha1=1.0, alpha2=a2, alpha_r=a2,
                    beta=1.0, gamma=a2, enc_scale=(1.0, a2), send=(False, True))
        spec = EquivNoiseSpec(lam2, (Uniform(lam2, -(1 - a2)), Gaussian(a2 * a2 * n)), (Uniform(lam2, 1.0),),
                              taps=((2, 1.0),), label="nested helper R2")
    else:
        a1 = p1 / (p1 + n)
        lam1 = _scaled(base, p1)
        lam2 = lam1.scaled(1.0 / a1)
        diag.update(alpha1=a1, branch="p1<p2", nesting="lam1 = alpha1 * lam2")
        cfg = _base("nested_helper", pc, "doubly", lam1, lam2, lam1, alpha1=a1, alpha2=1.0, alpha_r=a1,
                    beta=0.0, gamma=1.0, enc_scale=(a1, 1.0), dither=(True, False), send=(False, True))
        spec = EquivNoiseSpec(lam1, (Uniform(lam1, -(1 - a1)), Gaussian(a1 * a1 * n)), (Uniform(lam2, a1),),
                              taps=((2, a1),), label="nested helper R2")
    return cfg, {"R2": spec}, {"R2": out["R2"]}, out, diag


def _preset_aligned(pc, base, **_):
    p1, p2, n = pc.p1, pc.p2, pc.n
    s1, s2 = math.sqrt(p1), math.sqrt(p2)
    t = p1 + p2 + n
    lam1, lam2 = _scaled(base, p1), _scaled(base, p2)
    diag = {}
    if p1 <= p2:
        a1 = s1 * (s1 + s2) / t
        a2 = a1 * s2 / s1
        diag.update(alpha1=a1, alpha2=a2, branch="p1<=p2")
        if not (_check_alpha("alpha1", a1, diag) and _check_alpha("alpha2", a2, diag)):
            _fail("aligned_mmse", "N >= sqrt(P1*P2) - min(P1, P2)", diag)
        beta = a1 / a2
        cfg = _base("aligned_mmse", pc, "doubly", lam1, lam2, lam1, alpha1=a1, alpha2=a2, alpha_r=a1, beta=beta,
                    gamma=1.0, enc_scale=(a1, a2), send=(True, False))
        noise = (Uniform(lam1, -(1 - a1)), Gaussian(a1 * a1 * n), Uniform(lam2, -(beta - a1)))
        spec = EquivNoiseSpec(lam1, noise, (Uniform(lam1, 1.0),), taps=((1, 1.0),), label="aligned R1")
        var = (1 - a1) ** 2 * p1 + a1 * a1 * n + (s1 - a1 * s2) ** 2
        pred = _rate_from_var(p1, var)
    else:
        a2 = s2 * (s1 + s2) / t
        a1 = a2 * s1 / s2
        diag.update(alpha1=a1, alpha2=a2, branch="p1>p2")
        if not (_check_alpha("alpha1", a1, diag) and _check_alpha("alpha2", a2, diag)):
            _fail("aligned_mmse", "N >= sqrt(P1*P2) - min(P1, P2)", diag)
        gamma = a2 / a1
        cfg = _base("aligned_mmse", pc, "doubly", lam1, lam2, lam2, alpha1=a1, alpha2=a2, alpha_r=a2, beta=1.0,
                    gamma=gamma, enc_scale=(a1, a2), send=(True, False))
        noise = (Uniform(lam1, -(gamma - a2)), Uniform(lam2, -(1 - a2)), Gaussian(a2 * a2 * n))
        spec = EquivNoiseSpec(lam2, noise, (Uniform(lam1, gamma),), taps=((1, gamma),), label="aligned R1")
        var = (1 - a2) ** 2 * p2 + a2 * a2 * n + (s2 - a2 * s1) ** 2
        pred = _rate_from_var(p2, var)
    diag["variance"] = var
    return cfg, {"R1": spec}, {"R1": pred}, {"R1": cap(pc.p_min / n)}, diag


def _preset_helper_capacity(pc, base, **_):
    p1, p2, n = pc.p1, pc.p2, pc.n
    diag = {}
    if p2 >= p1 + n:
        q2 = p1 + n
        a1 = p1 / (p1 + n)
        kappa = math.sqrt(p1 / (p1 + n))
        lam1 = _scaled(base, p1)
        lam2 = _scaled(base, q2)
        diag.update(branch="p2>=p1+n", alpha1=a1, kappa=kappa, p2_used=q2)
        cfg = _base("helper_capacity", pc, "single", lam1, lam2, lam1, alpha1=a1, alpha2=0.0, alpha_r=a1,
                    beta=0.0, gamma=1.0, enc_scale=(a1, 0.0), dither=(True, False), send=(False, True))
        noise = (Uniform(lam1, -(1 - a1)), Gaussian(a1 * a1 * n))
        spec = EquivNoiseSpec(lam1, noise, (Uniform(lam2, a1),), taps=((2, a1),), label="helper R2")
        pred = cap(p1 / n)
    elif p1 >= p2 + n:
        q1 = p2 + n
        kappa = math.sqrt(p2 / (p2 + n))
        lam1 = _scaled(base, q1)
        lam2 = _scaled(base, p2)
        diag.update(branch="p1>=p2+n", alpha1=1.0, kappa=kappa, p1_used=q1)
        cfg = _base("helper_capacity", pc, "single", lam1, lam2, lam1, alpha1=1.0, alpha2=0.0, alpha_r=1.0,
                    beta=0.0, gamma=1.0, enc_scale=(1.0, 0.0), dither=(True, False), send=(False, True))
        spec = EquivNoiseSpec(lam1, (Gaussian(n),), (Uniform(lam2, 1.0),), taps=((2, 1.0),), label="helper R2")
        pred = cap(p2 / n)
    else:
        _fail("helper_capacity", "N <= |P1 - P2|", {"gap": abs(p1 - p2) - n})
    # signal power plus noise power fills the wrap cell exactly
    diag["power_identity_error"] = (spec.signal[0].variance + spec.noise_variance()
                                    - spec.wrap.second_moment)
    return cfg, {"R2": spec}, {"R2": pred}, {"R2": cap(pc.p_min / n)}, diag


def _preset_helper_mmse(pc, base, **_):
    p1, p2, n = pc.p1, pc.p2, pc.n
    a1 = 2 * p1 / (p1 + p2 + n)
    diag = {"alpha1": a1}
    if not abs(p1 - p2) < n:
        _fail("helper_mmse", "|P1 - P2| < N", diag)
    lam1, lam2 = _scaled(base, p1), _scaled(base, p2)
    cfg = _base("helper_mmse", pc, "single", lam1, lam2, lam1, alpha1=a1, alpha2=0.0, alpha_r=a1,
                beta=0.0, gamma=1.0, enc_scale=(a1, 0.0), dither=(True, False), send=(False, True))
    noise = (Uniform(lam1, -(1 - a1)), Gaussian(a1 * a1 * n))
    spec = EquivNoiseSpec(lam1, noise, (Uniform(lam2, a1),), taps=((2, a1),), label="helper R2")
    pred = float(helper_mmse_rate_raw(p1, p2, n))
    return cfg, {"R2": spec}, {"R2": pred}, {"R2": cap(pc.p_min / n)}, diag


def _preset_single_dirty(pc, base, alpha=None, **_):
    p1, p2, n = pc.p1, pc.p2, pc.n
    a1 = p1 / (p1 + n) if alpha is None else float(alpha)
    diag = {"alpha1": a1}
    if not _check_alpha("alpha1", a1, diag):
        _fail("single_dirty", "0 < alpha1 <= 1", diag)
    lam1, lam2 = _scaled(base, p1), _scaled(base, p2)
    cfg = _base("single_dirty", pc, "single", lam1, lam2, lam1, alpha1=a1, alpha2=0.0, alpha_r=a1,
                beta=0.0, gamma=1.0, enc_scale=(a1, 0.0), dither=(True, False), send=(True, True))
    self_noise = (Uniform(lam1, -(1 - a1)), Gaussian(a1 * a1 * n))
    r1 = EquivNoiseSpec(lam1, (Uniform(lam2, a1),) + self_noise, (Uniform(lam1, 1.0),),
                        taps=((1, 1.0),), label="single_dirty R1")
    r2 = EquivNoiseSpec(lam1, self_noise, (Uniform(lam2, a1),), taps=((2, a1),), output="genie",
                        label="single_dirty R2 given V1")
    pr1, pr2 = single_dirty_rates(a1, pc)
    outer = {"R1": cap(p1 / n), "R2": cap(pc.p_min / n), "sum": cap(p1 / n)}
    return cfg, {"R1": r1, "R2": r2}, {"R1": float(pr1), "R2": float(pr2)}, outer, diag


def _preset_common(pc, base, **_):
    p1, p2, n = pc.p1, pc.p2, pc.n
    a1 = p1 / (p1 + p2 + n)
    a2 = p2 / (p2 + n)
    beta = 1.0 / (1.0 - a1)
    lam1, lam2 = _scaled(base, p1), _scaled(base, p2)
    resid = p1 * (p2 + n) / (p1 + p2 + n)
    diag = {"alpha1": a1, "alpha2": a2, "beta": beta, "residual_power": resid}
    # the stage-I front end uses alpha_r = alpha1 and removes D1 only; beta is
    # the stage-II reconstruction factor
    cfg = _base("common", pc, "common", lam1, lam2, lam1, alpha1=a1, alpha2=a2, alpha_r=a1, beta=0.0,
                gamma=1.0, enc_scale=(a1, a2 * (1 - a1)), extras={"stage2_beta": beta})
    r1 = EquivNoiseSpec(lam1, (Uniform(lam1, -(1 - a1)), Uniform(lam2, a1), Gaussian(a1 * a1 * n)),
                        (Uniform(lam1, 1.0),), taps=((1, 1.0),), label="common stage I")
    r2 = EquivNoiseSpec(lam2, (Uniform(lam2, -(1 - a2)), Gaussian(a2 * a2 * n)), (Uniform(lam2, 1.0),),
                        taps=((2, 1.0),), output="stage3", label="common stage III")
    pred = {"R1": 0.5 * math.log2((p1 + p2 + n) / (p2 + n)), "R2": cap(p2 / n)}
    outer = {"R1": cap(p1 / n), "R2": cap(p2 / n), "sum": cap((p1 + p2) / n)}
    return cfg, {"R1": r1, "R2": r2}, pred, outer, diag


_BUILDERS = {
    "plain": _preset_plain,
    "symmetric_mmse": _preset_symmetric,
    "nested_helper": _preset_nested_helper,
    "aligned_mmse": _preset_aligned,
    "helper_capacity": _preset_helper_capacity,
    "helper_mmse": _preset_helper_mmse,
    "single_dirty": _preset_single_dirty,
    "common": _preset_common,
}


def build_preset(name: str, powers: PowerConfig, base: Lattice | None = None, **options) -> Preset:
    """Resolve a named scheme for the given powers.

    ``base`` is the lattice shape (scaled to each power), the integer
    lattice by default.  Options: ``dither`` for ``plain``; ``alpha`` for
    ``symmetric_mmse`` and ``single_dirty``.  Raises :class:`PresetError` with a
    diagnostics dict when the preset's validity condition fails.
    """
    if name not in _BUILDERS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    base = Lattice.scalar(1.0) if base is None else base
    cfg, channels, pred, outer, diag = _BUILDERS[name](powers, base, **options)
    _check_powers(cfg, diag)
    return Preset(cfg, channels, pred, outer, diag)


def _check_powers(cfg: SchemeConfig, diag: dict):
    limits = (cfg.powers.p1, cfg.powers.p2)
    for i, lat in enumerate((cfg.lam1, cfg.lam2)):
        sm = lat.second_moment
        if not math.isclose(sm, cfg.used_powers[i], rel_tol=POWER_TOL):
            raise ConfigError(f"lattice {i + 1} second moment {sm} differs from assigned power")
        if cfg.send[i] or cfg.dither[i]:
            if sm > limits[i] * (1 + POWER_TOL):
                raise ConfigError(f"user {i + 1} would exceed its power constraint")


def equiv_noise_of(cfg: SchemeConfig) -> dict:
    """Equivalent channels of a config produced by :func:`build_preset`."""
    if cfg.name not in _BUILDERS:
        raise ConfigError(f"no equivalent channel known for {cfg.name!r}")
    opts = {}
    if cfg.name == "plain":
        opts["dither"] = cfg.dither[0]
    if cfg.name in ("symmetric_mmse", "single_dirty"):
        opts["alpha"] = cfg.alpha1
    base = cfg.lam1.scaled(1.0 / math.sqrt(12 * cfg.lam1.second_moment)) if cfg.lam1.is_scalar else cfg.lam1
    return build_preset(cfg.name, cfg.powers, base, **opts).channels


# ---------------------------------------------------------------------------
# numeric rates


def numeric_rates(preset: Preset, bins: int = en.DEFAULT_BINS) -> dict:
    """Convolution-based rate of every equivalent channel of a 1-D preset."""
    return {k: en.rate_of_spec(s, bins) for k, s in preset.channels.items()}


def lower_bounds(preset: Preset) -> dict:
    return {k: s.lower_bound_1d() for k, s in preset.channels.items()}


# ---------------------------------------------------------------------------
# three-stage decoder for the common-interference MAC


@dataclass(frozen=True)
class StageReport:
    residual: np.ndarray  # stage-II estimate of the equivalent noise
    y_tilde: np.ndarray
    y_second: np.ndarray  # stage-III front-end output
    stage1_errors: np.ndarray | None  # True where V1 was decoded wrongly (needs the truth)

    @property
    def overload_fraction(self) -> float | None:
        """Fraction of symbols where stage II worked from a wrong ``V1``."""
        return None if self.stage1_errors is None else float(np.mean(self.stage1_errors))


def decode_common_three_stage(y, cfg: SchemeConfig, d1, d2, stage1: NestedPair | None = None,
                              stage3: NestedPair | None = None, v1_oracle=None, v1_true=None):
    """Successive decoder for the common-interference scheme.

    Stage I reduces ``alpha1 Y - D1`` modulo ``L1`` and decodes ``V1``
    with the fine lattice of ``stage1`` (or takes ``v1_oracle``).  Stage II
    rebuilds the equivalent noise and forms ``Y~ = (1 - alpha1)(Y + beta Z^)``,
    which equals ``X2 + (1 - alpha1) S + Z`` when stage I is right.  Stage
    III reduces ``alpha2 Y~ - D2`` modulo ``L2`` and decodes ``V2`` with
    ``stage3`` when given.  Returns ``(v1_hat, v2_hat, report)``; without a
    ``stage3`` pair ``v2_hat`` is the stage-III output itself.  Stage-I
    errors (a stage-II overload) are reported when ``v1_true`` is given.
    """
    if cfg.name != "common":
        raise ConfigError("three-stage decoding needs the common preset")
    if stage1 is None and v1_oracle is None:
        raise ConfigError("stage I needs a fine lattice or the oracle V1")
    y = np.asarray(y, dtype=float)
    a1, a2 = cfg.alpha1, cfg.alpha2
    beta = cfg.extras["stage2_beta"]
    y1 = mod_lattice(cfg.lam1, a1 * y - np.asarray(d1))
    v1 = stage1.decode(y1) if stage1 is not None else np.asarray(v1_oracle, dtype=float)
    z_hat = mod_lattice(cfg.lam1, y1 - v1)
    y_tilde = (1 - a1) * (y + beta * z_hat)
    y2 = mod_lattice(cfg.lam2, a2 * y_tilde - np.asarray(d2))
    v2 = stage3.decode(y2) if stage3 is not None else y2
    errors = None
    if v1_true is not None:
        errors = ~np.isclose(v1, np.asarray(v1_true, dtype=float), rtol=0.0, atol=1e-9 * cfg.lam1.delta)
    return v1, v2, StageReport(z_hat, y_tilde, y2, errors)


# ---------------------------------------------------------------------------
# end-to-end simulation


@dataclass(frozen=True)
class Simulation:
    v: tuple
    x: tuple
    d: tuple
    s: tuple
    z: np.ndarray
    y: np.ndarray
    y_front: np.ndarray
    outputs: dict  # channel name -> receiver samples of that channel
    z_eq: dict  # channel name -> [output - signal] mod L_r
    residual: np.ndarray | None = None  # common preset: true stage-II residual before the modulo
    residual_overload: float | None = None


def _states(cfg: SchemeConfig, interference, n, rng):
    count = 2 if cfg.channel == "doubly" else 1
    if interference is None:
        interference = InterferenceSpec.gaussian(cfg.powers.strong_variance())
    if isinstance(interference, InterferenceSpec):
        interference = (interference,) * count
    if len(interference) != count:
        raise ConfigError(f"{cfg.channel} channel needs {count} interference specs")
    return tuple(draw_state(sp, n, rng) for sp in interference)


def simulate_equivalent(preset: Preset, n_samples: int, rng: np.random.Generator,
                        interference=None, state_rng: np.random.Generator | None = None,
                        stage2: str = "decoder") -> Simulation:
    """Run encoders, channel and front end on ``n_samples`` 1-D symbols.

    Messages are uniform over each user's cell.  Interference comes from
    ``interference`` (one :class:`InterferenceSpec` or one per state;
    Gaussian with variance ``1e4 * max(P1, P2)`` by default) drawn with
    ``state_rng``, so that messages, dithers and noise can be held fixed
    while the interference changes.

    For the common preset, ``stage2="genie"`` feeds stage III the
    reconstruction it would get with an error-free stage I; the default
    runs the actual decoder, whose stage-I errors show up in
    ``residual_overload``.
    """
    if stage2 not in ("decoder", "genie"):
        raise ConfigError(f"unknown stage-II mode {stage2!r}")
    cfg = preset.config
    if not cfg.lam_r.is_scalar:
        raise ConfigError("simulation is implemented for 1-D lattices")
    n = int(n_samples)
    pc = cfg.powers
    lats = (cfg.lam1, cfg.lam2)
    v = tuple(sample_dither(lat, n, rng) if cfg.send[i] else np.zeros(n) for i, lat in enumerate(lats))
    d = tuple(sample_dither(lat, n, rng) if cfg.dither[i] else np.zeros(n) for i, lat in enumerate(lats))
    z = rng.normal(0.0, math.sqrt(pc.n), n)
    s = _states(cfg, interference, n, state_rng if state_rng is not None else rng)
    if cfg.channel == "doubly":
        s_enc = s
    elif cfg.channel == "single":
        s_enc = (s[0], np.zeros(n))
    else:
        s_enc = (s[0], s[0])
    x = []
    for i, lat in enumerate(lats):
        a = cfg.enc_scale[i]
        if cfg.send[i] or cfg.dither[i] or a != 0:
            x.append(mod_lattice(lat, v[i] - a * s_enc[i] + d[i]))
        else:
            x.append(v[i])
    y = channel_output(cfg.channel, x, s, z)
    y_front = receive_front_end(y, cfg, d[0], d[1])

    outputs, z_eq = {}, {}
    residual = overload = None
    for name, spec in preset.channels.items():
        if spec.output == "front":
            out = y_front
        elif spec.output == "genie":
            out = mod_lattice(cfg.lam1, y_front - v[0])
        elif spec.output == "stage3":
            a1 = cfg.alpha1
            residual = -(1 - a1) * x[0] + a1 * (x[1] + z)
            if stage2 == "decoder":
                _, out, _ = decode_common_three_stage(y, cfg, d[0], d[1], v1_oracle=v[0])
            else:
                y_tilde = x[1] + (1 - a1) * s[0] + z
                out = mod_lattice(cfg.lam2, cfg.alpha2 * y_tilde - d[1])
            overload = float(np.mean(~in_voronoi(cfg.lam1, residual)))
        else:
            raise ConfigError(f"unknown channel output {spec.output!r}")
        sig = sum(w * v[u - 1] for u, w in spec.taps)
        outputs[name] = out
        z_eq[name] = mod_lattice(spec.wrap, out - sig)
    return Simulation(v, tuple(x), d, s, z, y, y_front, outputs, z_eq, residual, overload)


def mc_rates(sim: Simulation, preset: Preset, bins: int = 512) -> dict:
    """Histogram estimate of each channel's rate, ``h(output) - h(z_eq)``."""
    out = {}
    for name, spec in preset.channels.items():
        period = spec.wrap.delta
        out[name] = (en.mc_entropy(sim.outputs[name], bins, period)
                     - en.mc_entropy(sim.z_eq[name], bins, period))
    return out


def noise_density(spec: EquivNoiseSpec, bins: int = en.DEFAULT_BINS) -> en.GridDensity:
    """Wrapped grid density of the equivalent noise of a 1-D channel."""
    period = spec.wrap.delta
    return en.sum_density(spec.noise, period / bins, period)


def encoder_power(preset: Preset, user: int, message: float, n_samples: int, rng,
                  interference=None) -> float:
    """Time-average power of one encoder for a fixed message point."""
    cfg = preset.config
    lat = cfg.lattice(user)
    i = user - 1
    d = sample_dither(lat, n_samples, rng) if cfg.dither[i] else np.zeros(n_samples)
    spec = interference if interference is not None else InterferenceSpec.gaussian(cfg.powers.strong_variance())
    s = draw_state(spec, n_samples, rng)
    a = cfg.enc_scale[i]
    if cfg.channel == "single" and user == 2:
        a = 0.0
    x = mod_lattice(lat, np.full(n_samples, message) - a * s + d)
    return float(np.mean(x * x))

