import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirtymac import entropy as en
from dirtymac import schemes as sc
from dirtymac.channels import ConfigError, InterferenceSpec, PowerConfig, channel_output
from dirtymac.lattice import Lattice, LatticeError, NestedPair, is_nested, mod_lattice, nearest_point
from dirtymac.rates import cap

GRID_TOL = 1e-6


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# encoder and front end


def test_encode_example():
    assert sc.encode(0.3, 5.45, 0.1, 1.0, Lattice.scalar(2.0)) == pytest.approx(0.95, abs=1e-12)


@given(v=st.floats(-0.99, 1.0), a=st.floats(0, 1))
def test_encode_identity_without_state_or_dither(v, a):
    assert sc.encode(v, 0.0, 0.0, a, Lattice.scalar(2.0)) == v


def test_encode_rejects_message_outside_cell():
    with pytest.raises(LatticeError):
        sc.encode(1.5, 0.0, 0.0, 1.0, Lattice.scalar(2.0))


def test_front_end_identity_and_noiseless_sum():
    cfg = sc.build_preset("plain", PowerConfig(1, 1, 1)).config
    lat = cfg.lam_r
    y = np.array([0.1, -0.5, 1.2])
    assert np.array_equal(sc.receive_front_end(y, cfg), y)
    v1, v2 = np.array([1.0, -1.5]), np.array([1.5, 0.2])
    x = [sc.encode(v, 0.0, 0.0, 1.0, lat) for v in (v1, v2)]
    y = channel_output("doubly", x, [np.zeros(2), np.zeros(2)], np.zeros(2))
    assert np.allclose(sc.receive_front_end(y, cfg), mod_lattice(lat, v1 + v2))


def test_front_end_requires_dither():
    cfg = sc.build_preset("symmetric_mmse", PowerConfig(1, 1, 1)).config
    with pytest.raises(ConfigError):
        sc.receive_front_end(np.zeros(3), cfg)


# ---------------------------------------------------------------------------
# presets


def test_symmetric_preset_example():
    p = sc.build_preset("symmetric_mmse", PowerConfig(1, 1, 1))
    assert p.config.alpha1 == pytest.approx(2 / 3)
    assert p.predicted["sum"] == pytest.approx(0.5 * math.log2(1.5), abs=1e-12)
    assert p.predicted["sum"] == pytest.approx(0.2925, abs=1e-4)


def test_full_rate_preset_example():
    p = sc.build_preset("nested_helper", PowerConfig(4, 1, 1))
    assert p.config.alpha2 == 0.5
    assert p.predicted["R2"] == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(sc.PresetError) as e:
        sc.build_preset("nested_helper", PowerConfig(3.9, 1, 1))
    assert e.value.diagnostics["noise_limit"] == pytest.approx(math.sqrt(3.9) - 1)


def test_common_preset_example():
    p = sc.build_preset("common", PowerConfig(1, 1, 1))
    assert p.predicted["R1"] == pytest.approx(0.5 * math.log2(1.5), abs=1e-12)
    assert p.predicted["R2"] == pytest.approx(0.5, abs=1e-12)
    assert p.config.extras["stage2_beta"] == pytest.approx(1 / (1 - 1 / 3))


@pytest.mark.parametrize("name,pc,key", [
    ("aligned_mmse", PowerConfig(1, 2, 0.1), "alpha1"),
    ("helper_capacity", PowerConfig(1, 1.5, 1), "gap"),
    ("helper_mmse", PowerConfig(1, 3, 1), "alpha1"),
    ("symmetric_mmse", PowerConfig(1, 1, 1), "alpha"),
    ("single_dirty", PowerConfig(1, 1, 1), "alpha1"),
])
def test_preset_errors_carry_diagnostics(name, pc, key):
    opts = {"alpha": 0.0} if name in ("symmetric_mmse", "single_dirty") else {}
    with pytest.raises(sc.PresetError) as e:
        sc.build_preset(name, pc, **opts)
    assert key in e.value.diagnostics
    assert "condition" in e.value.diagnostics


def test_unknown_preset():
    with pytest.raises(ConfigError):
        sc.build_preset("nope", PowerConfig(1, 1, 1))


CASES = [
    ("plain", PowerConfig(2, 3, 1)),
    ("symmetric_mmse", PowerConfig(4, 4, 1)),
    ("nested_helper", PowerConfig(10, 1, 1)),
    ("nested_helper", PowerConfig(1, 9, 1)),
    ("aligned_mmse", PowerConfig(1, 2, 1)),
    ("aligned_mmse", PowerConfig(20, 5, 10)),
    ("helper_capacity", PowerConfig(1, 10, 1)),
    ("helper_capacity", PowerConfig(5, 1, 1)),
    ("helper_mmse", PowerConfig(1, 1, 1)),
    ("single_dirty", PowerConfig(3, 1, 1)),
    ("common", PowerConfig(4, 4, 1)),
]


@pytest.mark.parametrize("name,pc", CASES)
def test_config_invariants(name, pc):
    p = sc.build_preset(name, pc)
    cfg = p.config
    for lat, used, limit, active in ((cfg.lam1, cfg.used_powers[0], pc.p1, cfg.send[0] or cfg.dither[0]),
                                     (cfg.lam2, cfg.used_powers[1], pc.p2, cfg.send[1] or cfg.dither[1])):
        assert lat.second_moment == pytest.approx(used, rel=1e-9)
        if active:
            assert used <= limit * (1 + 1e-9)
    for a in (cfg.alpha1, cfg.alpha2, cfg.alpha_r):
        assert 0 <= a <= 1
    if name == "nested_helper":
        fine, coarse = (cfg.lam2, cfg.lam1) if pc.p1 >= pc.p2 else (cfg.lam1, cfg.lam2)
        assert fine.delta == pytest.approx(coarse.delta * (cfg.alpha2 if pc.p1 >= pc.p2 else cfg.alpha1))
    # the equivalent channel can be recovered from the config alone
    again = sc.equiv_noise_of(cfg)
    for k, spec in p.channels.items():
        assert again[k].noise_variance() == pytest.approx(spec.noise_variance(), rel=1e-12)


def test_nesting_for_helper_preset_with_dyadic_scale():
    cfg = sc.build_preset("nested_helper", PowerConfig(4, 1, 1)).config
    assert is_nested(cfg.lam1, cfg.lam2).nested


@pytest.mark.parametrize("p", [0.5, 1.0, 7.0])
def test_symmetric_equivalent_variance(p):
    pr = sc.build_preset("symmetric_mmse", PowerConfig(p, p, 1.0))
    a = 2 * p / (2 * p + 1)
    assert pr.channels["sum"].noise_variance() == pytest.approx(a * a + 2 * (1 - a) ** 2 * p, rel=1e-12)


def test_symmetric_alpha_one_is_pure_gaussian():
    spec = sc.build_preset("symmetric_mmse", PowerConfig(2, 2, 1), alpha=1.0).channels["sum"]
    assert len(spec.noise) == 1 and spec.noise[0].kind == "gaussian"
    assert spec.noise[0].variance == 1.0


@pytest.mark.parametrize("pc", [PowerConfig(1, 2, 1), PowerConfig(2, 3, 4), PowerConfig(20, 5, 10)])
def test_aligned_mmse_equivalent_variance(pc):
    p = sc.build_preset("aligned_mmse", pc)
    lo, hi = sorted((pc.p1, pc.p2))
    s_lo, s_hi = math.sqrt(lo), math.sqrt(hi)
    a = s_lo * (s_lo + s_hi) / (pc.p1 + pc.p2 + pc.n)
    expected = (1 - a) ** 2 * lo + a * a * pc.n + (s_lo - a * s_hi) ** 2
    assert p.channels["R1"].noise_variance() == pytest.approx(expected, rel=1e-12)
    assert p.diagnostics["variance"] == pytest.approx(expected, rel=1e-12)


def test_helper_mmse_components():
    p = sc.build_preset("helper_mmse", PowerConfig(1, 1.5, 1))
    spec = p.channels["R2"]
    a = 2 / 3.5
    assert [c.kind for c in spec.noise] == ["uniform", "gaussian"]
    assert spec.noise[0].weight == pytest.approx(-(1 - a))
    assert spec.signal[0].weight == pytest.approx(a)


@pytest.mark.parametrize("pc", [PowerConfig(1, 2, 1), PowerConfig(1, 10, 1), PowerConfig(5, 1, 1),
                                PowerConfig(10, 50, 0.5)])
def test_helper_power_identity(pc):
    assert abs(sc.build_preset("helper_capacity", pc).diagnostics["power_identity_error"]) < 1e-9


def test_full_rate_interference_term_vanishes_bit_exact():
    cfg = sc.build_preset("nested_helper", PowerConfig(4, 1, 1)).config
    r = rng(1)
    s1 = r.normal(0, 1e3, 100_000)
    d1 = r.uniform(-cfg.lam1.delta / 2, cfg.lam1.delta / 2, 100_000)
    q = nearest_point(cfg.lam1, -s1 + d1)
    assert np.all(mod_lattice(cfg.lam2, cfg.alpha2 * q) == 0.0)


# ---------------------------------------------------------------------------
# rates of the 1-D schemes


@pytest.mark.parametrize("name,pc", CASES)
def test_numeric_rate_between_bounds(name, pc):
    p = sc.build_preset(name, pc)
    num = sc.numeric_rates(p, 2**14)
    lb = sc.lower_bounds(p)
    for k in p.channels:
        assert num[k].rate >= lb[k] - GRID_TOL
        assert num[k].rate <= p.outer[k] + 1e-9


def test_cell_uniform_lower_bound_is_shaping_adjusted():
    p = sc.build_preset("symmetric_mmse", PowerConfig(4, 4, 1))
    spec = p.channels["sum"]
    assert spec.signal_is_cell_uniform()
    shaping = 0.5 * math.log2(2 * math.pi * math.e / 12)
    assert spec.lower_bound_1d() == pytest.approx(max(p.predicted["sum"] - shaping, 0), abs=1e-12)


# ---------------------------------------------------------------------------
# simulation


def test_symmetric_simulation_matches_density():
    p = sc.build_preset("symmetric_mmse", PowerConfig(1, 1, 1))
    sim = sc.simulate_equivalent(p, 10**6, rng(2))
    d = sc.noise_density(p.channels["sum"], 2**14)
    assert en.ks_to_density(sim.z_eq["sum"], d) < 0.005
    assert en.ks_to_uniform(sim.outputs["sum"], p.config.lam_r.delta) < 0.005
    mc = sc.mc_rates(sim, p)["sum"]
    assert mc == pytest.approx(sc.numeric_rates(p, 2**14)["sum"].rate, abs=0.01)


def test_plain_output_independent_of_interference():
    p = sc.build_preset("plain", PowerConfig(1, 1, 1))
    n = 10**6
    a = sc.simulate_equivalent(p, n, rng(3), InterferenceSpec.gaussian(1e4), state_rng=rng(10))
    b = sc.simulate_equivalent(p, n, rng(3), InterferenceSpec.gaussian(1e5), state_rng=rng(11))
    assert en.ks_two_sample(a.y_front, b.y_front) < 0.005
    # undithered: the output depends on the state only through a lattice point
    assert np.array_equal(a.v[0], b.v[0])


def test_simulation_rejects_bad_inputs():
    p = sc.build_preset("plain", PowerConfig(1, 1, 1))
    with pytest.raises(ConfigError):
        sc.simulate_equivalent(p, 10, rng(), stage2="oracle")
    with pytest.raises(ConfigError):
        sc.simulate_equivalent(p, 10, rng(), interference=(InterferenceSpec.gaussian(1.0),) * 3)
    hexagonal = Lattice(np.array([[1.0, 0.5], [0.0, math.sqrt(3) / 2]]))
    with pytest.raises(ConfigError):
        sc.simulate_equivalent(sc.build_preset("plain", PowerConfig(1, 1, 1), base=hexagonal), 10, rng())


def test_power_compliance_dithered_per_message():
    p = sc.build_preset("symmetric_mmse", PowerConfig(2, 2, 1))
    sigma2 = p.config.lam1.second_moment
    zero = InterferenceSpec.gaussian(0.0)
    for msg in (0.0, 0.4 * p.config.lam1.delta):
        assert sc.encoder_power(p, 1, msg, 10**6, rng(4), zero) == pytest.approx(sigma2, rel=0.01)


def test_power_compliance_undithered_only_on_average():
    p = sc.build_preset("plain", PowerConfig(2, 2, 1), dither=False)
    lat = p.config.lam1
    zero = InterferenceSpec.gaussian(0.0)
    edge = 0.45 * lat.delta
    # a single codeword near the cell edge exceeds the budget without dither
    assert sc.encoder_power(p, 1, edge, 1000, rng(5), zero) > 1.5 * lat.second_moment
    msgs = rng(6).uniform(-lat.delta / 2, lat.delta / 2, 10**6)
    assert np.mean(msgs**2) == pytest.approx(lat.second_moment, rel=0.01)
    pd = sc.build_preset("plain", PowerConfig(2, 2, 1), dither=True)
    assert sc.encoder_power(pd, 1, edge, 10**6, rng(7), zero) == pytest.approx(lat.second_moment, rel=0.01)


# ---------------------------------------------------------------------------
# three-stage decoder


def test_three_stage_noiseless_recovery():
    pc = PowerConfig(1e6, 1.0, 1e-12)
    cfg = sc.build_preset("common", pc).config
    stage1 = NestedPair.scalar(cfg.lam1.delta, 64)
    stage3 = NestedPair.scalar(cfg.lam2.delta, 4)
    r = rng(8)
    n = 10_000
    v1 = r.choice(stage1.codebook(), n)
    v2 = r.choice(stage3.codebook(), n)
    d1 = r.uniform(-cfg.lam1.delta / 2, cfg.lam1.delta / 2, n)
    d2 = r.uniform(-cfg.lam2.delta / 2, cfg.lam2.delta / 2, n)
    s = np.zeros(n)
    x1 = sc.encode(v1, s, d1, cfg.enc_scale[0], cfg.lam1)
    x2 = sc.encode(v2, s, d2, cfg.enc_scale[1], cfg.lam2)
    y = channel_output("common", [x1, x2], [s], np.zeros(n))
    v1_hat, v2_hat, rep = sc.decode_common_three_stage(y, cfg, d1, d2, stage1, stage3, v1_true=v1)
    assert np.allclose(v1_hat, v1) and np.allclose(v2_hat, v2)
    assert rep.overload_fraction == 0.0


def test_three_stage_needs_common_preset_and_stage1():
    cfg = sc.build_preset("common", PowerConfig(1, 1, 1)).config
    with pytest.raises(ConfigError):
        sc.decode_common_three_stage(np.zeros(2), cfg, np.zeros(2), np.zeros(2))
    other = sc.build_preset("plain", PowerConfig(1, 1, 1)).config
    with pytest.raises(ConfigError):
        sc.decode_common_three_stage(np.zeros(2), other, np.zeros(2), np.zeros(2), v1_oracle=np.zeros(2))


@pytest.mark.parametrize("pc", [PowerConfig(1, 1, 1), PowerConfig(10, 4, 1)])
def test_common_residual_power(pc):
    p = sc.build_preset("common", pc)
    sim = sc.simulate_equivalent(p, 10**6, rng(9))
    target = pc.p1 * (pc.p2 + pc.n) / (pc.p1 + pc.p2 + pc.n)
    assert np.mean(sim.residual**2) == pytest.approx(target, rel=0.02)
    assert 0.0 <= sim.residual_overload < 0.05


def test_common_stage3_genie_matches_density():
    p = sc.build_preset("common", PowerConfig(4, 4, 1))
    sim = sc.simulate_equivalent(p, 10**6, rng(12), stage2="genie")
    d = sc.noise_density(p.channels["R2"], 2**14)
    assert en.ks_to_density(sim.z_eq["R2"], d) < 0.005


@settings(max_examples=20, deadline=None)
@given(p=st.floats(0.1, 50), n=st.floats(0.1, 10))
def test_symmetric_prediction_below_outer(p, n):
    pr = sc.build_preset("symmetric_mmse", PowerConfig(p, p, n))
    assert pr.predicted["sum"] <= cap(p / n) + 1e-12
    assert pr.channels["sum"].lower_bound_1d() <= pr.predicted["sum"] + 1e-12
