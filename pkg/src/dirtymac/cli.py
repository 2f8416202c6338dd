"""Command-line front end: rate regions, gap tables, scheme simulations, roots.

Usage::

    python -m dirtymac <command> [--config FILE] [--seed N] [--out DIR] [--samples N]

Commands are ``regions``, ``gaps``, ``simulate``, ``roots`` and
``envelope``.  The config file is plain ``key = value`` lines (``#`` starts
a comment).  Numeric lists are comma separated, or ``linspace(a, b, n)`` /
``logspace(a, b, n)`` with base-10 exponents.  Keys:

    channel      doubly | single | common | k_user         (default doubly)
    p1, p2, n    power and noise grids; all combinations are used
    snr          P/N grid for gaps and envelope             (default linspace(0.01, 10, 1000))
    p2_over_p1   power ratio used by gaps                   (default 1)
    k            user counts for k_user                     (default 2)
    presets      scheme names for simulate                  (default all)
    family       envelope family: symmetric | one_dim | k_user | helper
    alphas       number of MMSE factors for single-user regions (default 801)
    samples      Monte Carlo samples per simulation         (default 4000000)
    bins         grid bins per period for numeric rates     (default 16384)
    seed         RNG seed, required by simulate
    workers      worker processes for simulate              (default 1)
    out          output directory                           (default .)

Exit codes: 0 success, 2 an invariant failed, 3 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import entropy as en
from . import rates as rt
from . import schemes as sc
from .channels import CHANNEL_KINDS, ConfigError, InterferenceSpec, PowerConfig
from .lattice import sample_dither

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 2, 3
FAMILIES = ("symmetric", "one_dim", "k_user", "helper")
RATE_TOL = 1e-9
GRID_TOL = 1e-6  # numeric rates are accurate to this on the default grid
MC_TOL = 0.01
INVARIANCE_TOL = 1e-3
KS_TOL = 0.005


@dataclass
class SweepConfig:
    channel: str = "doubly"
    p1: list = field(default_factory=lambda: [1.0])
    p2: list = field(default_factory=lambda: [1.0])
    n: list = field(default_factory=lambda: [1.0])
    snr: list = field(default_factory=lambda: list(np.linspace(0.01, 10.0, 1000)))
    p2_over_p1: float = 1.0
    k: list = field(default_factory=lambda: [2])
    presets: list = field(default_factory=lambda: list(sc.PRESETS))
    family: str = "symmetric"
    alphas: int = 801
    samples: int = 4_000_000
    bins: int = en.DEFAULT_BINS
    seed: int | None = None
    workers: int = 1
    out: str = "."

    def validate(self):
        if self.channel not in CHANNEL_KINDS:
            raise ConfigError(f"channel must be one of {CHANNEL_KINDS}")
        for name in ("p1", "p2", "n", "snr", "k", "presets"):
            if not getattr(self, name):
                raise ConfigError(f"{name} grid is empty")
        for name in ("p1", "p2", "n", "snr"):
            if any(not (math.isfinite(v) and v > 0) for v in getattr(self, name)):
                raise ConfigError(f"{name} values must be positive")
        if any(int(k) != k or k < 2 for k in self.k):
            raise ConfigError("k values must be integers >= 2")
        bad = [p for p in self.presets if p not in sc.PRESETS]
        if bad:
            raise ConfigError(f"unknown presets {bad}")
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        if self.samples < en.MIN_MC_SAMPLES:
            raise ConfigError(f"samples must be at least {en.MIN_MC_SAMPLES}")
        if self.alphas < 3 or self.bins < 64 or self.workers < 1 or not self.p2_over_p1 > 0:
            raise ConfigError("alphas >= 3, bins >= 64, workers >= 1 and p2_over_p1 > 0 are required")
        if self.seed is not None and not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return self

    def powers(self):
        return [PowerConfig(a, b, c) for a, b, c in itertools.product(self.p1, self.p2, self.n)]


_RANGE = re.compile(r"^(linspace|logspace)\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)$")


def _floats(text: str) -> list:
    m = _RANGE.match(text.strip())
    if m:
        fn, a, b, k = m.groups()
        return [float(v) for v in getattr(np, fn)(float(a), float(b), int(k))]
    return [float(t) for t in text.split(",") if t.strip()]


_PARSERS = {
    "channel": str.strip, "family": str.strip, "out": str.strip,
    "p1": _floats, "p2": _floats, "n": _floats, "snr": _floats,
    "k": lambda t: [int(v) for v in _floats(t)],
    "presets": lambda t: [p.strip() for p in t.split(",") if p.strip()],
    "p2_over_p1": float, "alphas": int, "samples": int, "bins": int, "seed": int, "workers": int,
}


def parse_config(text: str) -> SweepConfig:
    """Parse ``key = value`` lines into a :class:`SweepConfig`."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return SweepConfig(**values)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# ---------------------------------------------------------------------------
# regions


REGION_HEADER = ["row_type", "label", "r1", "r2", "coef1", "coef2", "bound"]


def _region_rows(region: rt.Region, per_edge: int = 20):
    rows = []
    for c in region.constraints:
        rows.append(["constraint", "", "", "", c.coeffs[0], c.coeffs[1], c.bound])
    for v in region.vertices:
        rows.append(["vertex", "", v[0], v[1], "", "", ""])
    for p in region.boundary(per_edge):
        rows.append(["boundary", "", p[0], p[1], "", "", ""])
    for name, val in sorted(region.notes.items()):
        if isinstance(val, tuple) and len(val) == 2:
            rows.append(["point", name, val[0], val[1], "", "", ""])
        else:
            rows.append(["note", name, "", "", "", "", val])
    return rows


def _regions_for(cfg: SweepConfig, pc: PowerConfig):
    """(inner, outer) region pairs for one power point; inner may be None."""
    if cfg.channel == "doubly":
        return [(rt.inner_region_doubly(pc, "aligned_mmse"), rt.outer_region("doubly", pc))]
    if cfg.channel == "single":
        inner = rt.region_single_dirty(pc, np.linspace(0.0, 1.0, cfg.alphas))
        return [(inner, rt.outer_region("single", pc))]
    if cfg.channel == "common":
        return [(None, rt.common_interference_region(pc))]
    out = []
    for k in cfg.k:
        b = rt.k_user_bounds(k, pc.p1, pc.n)
        outer = rt.Region.from_constraints([rt.Constraint((1.0, 1.0), b.outer)], f"outer_k_user_{k}",
                                           users=k, note="sum-rate projection onto two users")
        inner = rt.Region.from_constraints([rt.Constraint((1.0, 1.0), b.inner)], f"inner_k_user_{k}", users=k)
        out.append((inner, outer))
    return out


def cmd_regions(cfg: SweepConfig, out: Path) -> int:
    index = []
    status = EXIT_OK
    powers = cfg.powers()
    if cfg.channel == "k_user":
        powers = [PowerConfig(p, p, n) for p, n in itertools.product(cfg.p1, cfg.n)]
    for i, pc in enumerate(powers):
        for inner, outer in _regions_for(cfg, pc):
            for region in (inner, outer):
                if region is None:
                    continue
                name = f"{region.label}_{i:03d}.csv"
                write_csv(out / name, REGION_HEADER, _region_rows(region))
                index.append([i, pc.p1, pc.p2, pc.n, region.label, name])
            if inner is not None:
                verdict = rt.containment_check(inner, outer)
                if not verdict.contained:
                    print(f"error: {inner.label} exceeds {outer.label} by {verdict.max_violation:.3g} "
                          f"at P1={pc.p1:g} P2={pc.p2:g} N={pc.n:g}", file=sys.stderr)
                    status = EXIT_INVARIANT
    write_csv(out / "regions_index.csv", ["point", "p1", "p2", "n", "label", "file"], index)
    print(f"wrote {len(index)} region files to {out}")
    return status


# ---------------------------------------------------------------------------
# gaps


GAPS_HEADER = ["p1", "p2", "n", "snr", "outer_doubly", "inner_doubly_raw", "inner_doubly", "inner_one_dim",
               "zeta", "outer_helper", "inner_helper_raw", "inner_helper", "eta", "eta_timeshared"]


def gap_rows(cfg: SweepConfig):
    x = np.tile(np.asarray(cfg.snr, dtype=float), len(cfg.n))
    nv = np.repeat(np.asarray(cfg.n, dtype=float), len(cfg.snr))
    p1 = x * nv
    p2 = p1 * cfg.p2_over_p1
    pm = np.minimum(p1, p2)
    outer = rt.cap(pm / nv)
    # doubly dirty: time-shared aligned scheme, full rate in its own regime
    d_raw = rt.helper_aligned_rate_raw(p1, p2, nv)
    d_env = np.minimum(rt.timeshare_envelope(rt.doubly_point_rate, p1, p2, nv), outer)
    d_inner = np.where(rt.full_rate_condition(p1, p2, nv), outer, d_env)
    one_dim = rt.chord_envelope(pm / nv, 0.5, rt.SHAPING_LOSS_1D)
    zeta = np.maximum(outer - d_inner, 0.0)
    # helper problem
    full = rt.helper_capacity_regime(p1, p2, nv)
    h_raw = np.where(full, outer, rt.helper_mmse_rate_raw(p1, p2, nv))
    h_env = rt.timeshare_envelope(rt.helper_point_rate, p1, p2, nv)
    h_inner = np.where(full, outer, np.minimum(np.maximum(h_env, h_raw), outer))
    eta = np.where(full, 0.0, np.maximum(outer - h_raw, 0.0))
    eta_t = np.maximum(outer - h_inner, 0.0)
    cols = (p1, p2, nv, x, outer, d_raw, d_inner, one_dim, zeta, outer, h_raw, h_inner, eta, eta_t)
    return [list(r) for r in zip(*cols)]


def cmd_gaps(cfg: SweepConfig, out: Path) -> int:
    rows = gap_rows(cfg)
    status = EXIT_OK
    for r in rows:
        row = dict(zip(GAPS_HEADER, r))
        if (row["inner_doubly"] > row["outer_doubly"] + RATE_TOL
                or row["inner_helper"] > row["outer_helper"] + RATE_TOL):
            print(f"error: inner bound above outer bound at snr={row['snr']:g}", file=sys.stderr)
            status = EXIT_INVARIANT
    write_csv(out / "gaps.csv", GAPS_HEADER, rows)
    zi = int(np.argmax([r[8] for r in rows]))
    ei = int(np.argmax([r[12] for r in rows]))
    print(f"max zeta {rows[zi][8]:.6f} bit at P/N {rows[zi][3]:.4g}; "
          f"max eta {rows[ei][12]:.6f} bit at P/N {rows[ei][3]:.4g}")
    return status


# ---------------------------------------------------------------------------
# simulate


SIM_HEADER = ["preset", "p1", "p2", "n", "channel", "status", "predicted", "lower_bound_1d", "numeric",
              "outer", "mc", "ks_noise", "ks_output_uniform", "invariance_rate", "invariance_ks",
              "power_user1", "power_user2", "power_target1", "power_target2", "stage2_residual_power",
              "stage2_overload", "ok"]

SCENARIOS = (("gaussian_1e4", 1e4), ("gaussian_1e5", 1e5), ("adversarial", None))


def _scenario_spec(pc: PowerConfig, factor):
    if factor is None:
        return InterferenceSpec.adversarial("sawtooth", math.sqrt(pc.strong_variance()))
    return InterferenceSpec.gaussian(pc.strong_variance(factor))


def simulate_cell(args) -> list:
    """All rows for one (preset, power) cell; pure given its arguments."""
    name, pc, samples, bins, seed, cell = args
    try:
        preset = sc.build_preset(name, pc)
    except sc.PresetError as exc:
        cond = exc.diagnostics.get("condition", str(exc))
        return [[name, pc.p1, pc.p2, pc.n, "", f"invalid: {cond}"] + [""] * (len(SIM_HEADER) - 7) + [True]]
    numeric = sc.numeric_rates(preset, bins)
    lower = sc.lower_bounds(preset)
    sims, mcs = [], []
    for j, (_, factor) in enumerate(SCENARIOS):
        # same messages, dithers and noise in every scenario; only the interference changes
        rng = np.random.default_rng([seed, cell])
        state_rng = np.random.default_rng([seed, cell, j + 1])
        sim = sc.simulate_equivalent(preset, samples, rng, _scenario_spec(pc, factor), state_rng, stage2="genie")
        sims.append(sim)
        mcs.append(sc.mc_rates(sim, preset))
    base = sims[0]
    cfg = preset.config
    prng = np.random.default_rng([seed, cell, 99])
    powers = []
    for user in (1, 2):
        lat = cfg.lattice(user)
        if cfg.dither[user - 1]:
            msg = float(sample_dither(lat, 1, prng)[0]) if cfg.send[user - 1] else 0.0
            powers.append(sc.encoder_power(preset, user, msg, min(samples, 200_000), prng))
        else:
            powers.append(float(np.mean(base.x[user - 1] ** 2)))
    resid = overload = ""
    if name == "common":
        dec = sc.simulate_equivalent(preset, samples, np.random.default_rng([seed, cell]),
                                     _scenario_spec(pc, 1e4), np.random.default_rng([seed, cell, 1]))
        resid = float(np.mean(dec.residual**2))
        overload = dec.residual_overload
    rows = []
    for ch, spec in preset.channels.items():
        r = numeric[ch].rate
        density = sc.noise_density(spec, bins)
        ks_noise = max(en.ks_to_density(s.z_eq[ch], density) for s in sims)
        ks_unif = (en.ks_to_uniform(base.outputs[ch], spec.wrap.delta) if spec.signal_is_cell_uniform() else "")
        inv_rate = max(abs(m[ch] - mcs[0][ch]) for m in mcs)
        inv_ks = max(en.ks_two_sample(s.outputs[ch], base.outputs[ch]) for s in sims[1:])
        mc = mcs[0][ch]
        ok = (r >= lower[ch] - GRID_TOL and r <= preset.outer[ch] + RATE_TOL and abs(mc - r) < MC_TOL
              and inv_rate < INVARIANCE_TOL and inv_ks < KS_TOL and ks_noise < KS_TOL
              and (ks_unif == "" or ks_unif < KS_TOL))
        if resid != "":
            ok = ok and abs(resid / preset.diagnostics["residual_power"] - 1) < 0.02
        rows.append([name, pc.p1, pc.p2, pc.n, ch, "valid", preset.predicted[ch], lower[ch], r,
                     preset.outer[ch], mc, ks_noise, ks_unif, inv_rate, inv_ks, powers[0], powers[1],
                     cfg.lam1.second_moment, cfg.lam2.second_moment, resid, overload, ok])
    return rows


def cmd_simulate(cfg: SweepConfig, out: Path) -> int:
    if cfg.seed is None:
        raise ConfigError("simulate needs a seed (config key 'seed' or --seed)")
    cells = []
    for name in cfg.presets:
        for pc in cfg.powers():
            cells.append((name, pc, cfg.samples, cfg.bins, cfg.seed, len(cells)))
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(simulate_cell, cells))
    else:
        results = [simulate_cell(c) for c in cells]
    rows = [r for res in results for r in res]
    write_csv(out / "simulate.csv", SIM_HEADER, rows)
    failed = [r for r in rows if not r[-1]]
    for r in rows:
        if str(r[5]).startswith("invalid"):
            print(f"warning: {r[0]} at P1={r[1]:g} P2={r[2]:g} N={r[3]:g}: {r[5]}", file=sys.stderr)
        else:
            print(f"{r[0]:14s} {r[4]:3s} P1={r[1]:<8g} P2={r[2]:<8g} N={r[3]:<6g} numeric={r[8]:.4f} "
                  f"predicted={r[6]:.4f} mc={r[10]:.4f} {'ok' if r[-1] else 'FAIL'}")
    if failed:
        print(f"{len(failed)} row(s) failed an invariant", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------------------
# roots and envelopes


def cmd_roots(cfg: SweepConfig, out: Path | None) -> int:
    rep = rt.solve_roots()
    for line in rep.lines():
        print(line)
    if out is not None:
        write_csv(out / "roots.csv", ["quantity", "value", "residual"], [
            ["x_star", rep.x_star, rep.x_residual],
            ["snr_star", rep.snr_star, rep.snr_residual],
            ["u_star", rep.u_star, rep.u_residual],
            ["helper_slope", rep.helper_slope, ""],
            ["outer_slope", rep.outer_slope, ""],
            ["inner_slope_derived", rep.inner_slope_derived, ""],
            ["inner_slope_stated", rep.inner_slope_stated, ""],
        ])
    bad = max(rep.x_residual, rep.snr_residual, rep.u_residual) >= rt.ROOT_TOL
    return EXIT_INVARIANT if bad else EXIT_OK


def envelope_rows(cfg: SweepConfig):
    x = np.asarray(sorted(set(cfg.snr)), dtype=float)
    rows = []
    if cfg.family == "k_user":
        for k in cfg.k:
            raw = np.maximum(0.5 * np.log2(1.0 / k + x), 0.0)
            env = rt.uce(x, raw)
            chord = rt.chord_envelope(x, 1.0 / k)
            rows += [[k, a, b, c, d, rt.cap(a)] for a, b, c, d in zip(x, raw, env.hull, chord)]
        return rows
    if cfg.family == "helper":
        raw = rt.helper_mmse_rate_raw(x, x, 1.0)
        chord = rt.timeshare_envelope(rt.helper_point_rate, x, x, np.ones_like(x))
    else:
        shift = rt.SHAPING_LOSS_1D if cfg.family == "one_dim" else 0.0
        with np.errstate(divide="ignore"):
            raw = np.maximum(0.5 * np.log2(0.5 + x) - shift, 0.0)
        chord = rt.chord_envelope(x, 0.5, shift)
    env = rt.uce(x, raw)
    return [[2, a, b, c, d, rt.cap(a)] for a, b, c, d in zip(x, raw, env.hull, chord)]


def cmd_envelope(cfg: SweepConfig, out: Path) -> int:
    if len(set(cfg.snr)) < 3:
        raise ConfigError("envelope needs at least 3 distinct snr values")
    rows = envelope_rows(cfg)
    write_csv(out / f"envelope_{cfg.family}.csv", ["users", "snr", "raw", "hull", "analytic", "outer"], rows)
    bad = any(r[3] > r[5] + RATE_TOL or r[4] > r[5] + RATE_TOL for r in rows)
    return EXIT_INVARIANT if bad else EXIT_OK


COMMANDS = {"regions": cmd_regions, "gaps": cmd_gaps, "simulate": cmd_simulate,
            "roots": cmd_roots, "envelope": cmd_envelope}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirtymac", description="Lattice strategies for dirty multiple-access channels.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--samples", type=int, help="Monte Carlo samples (overrides the config)")
    return p


def load_config(args) -> SweepConfig:
    cfg = parse_config(args.config.read_text(encoding="utf-8")) if args.config else SweepConfig()
    overrides = {k: getattr(args, k) for k in ("seed", "samples") if getattr(args, k) is not None}
    if args.out is not None:
        overrides["out"] = str(args.out)
    return replace(cfg, **overrides).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        out = Path(cfg.out)
        if args.command != "roots" or args.out is not None:
            out.mkdir(parents=True, exist_ok=True)
        else:
            out = None
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
