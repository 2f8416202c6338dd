import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirtymac.channels import (
    ConfigError, InterferenceSpec, PowerConfig, channel_output, correlated_decompose, draw_state,
    target_covariance,
)


def test_power_config_validation():
    pc = PowerConfig(3.0, 1.0, 1.0)
    assert pc.p_min == 1.0 and pc.p_max == 3.0
    assert pc.swapped() == PowerConfig(1.0, 3.0, 1.0)
    assert pc.strong_variance() == 3e4
    for bad in [(0, 1, 1), (1, -1, 1), (1, 1, math.nan), (1, 1, math.inf)]:
        with pytest.raises(ConfigError):
            PowerConfig(*bad)
    with pytest.raises(ConfigError):
        PowerConfig(1, 2, 1, k=3)
    with pytest.raises(ConfigError):
        PowerConfig.symmetric(1.0, k=1)


def test_channel_output_sums():
    z = np.array([0.1, 0.2])
    x1, x2 = np.array([1.0, 2.0]), np.array([3.0, 4.0])
    s1, s2 = np.array([10.0, 20.0]), np.array([100.0, 200.0])
    assert np.allclose(channel_output("doubly", [x1, x2], [s1, s2], z), [114.1, 226.2])
    assert np.allclose(channel_output("single", [x1, x2], [s1], z), [14.1, 26.2])
    assert np.allclose(channel_output("common", [x1, x2], [s1], z), [14.1, 26.2])
    assert np.allclose(channel_output("k_user", [x1, x2, x1], [s1, s1, s2], z), [125.1, 248.2])


@pytest.mark.parametrize("kind,xs,ss", [("doubly", 2, 1), ("single", 2, 2), ("k_user", 3, 2), ("nope", 2, 2)])
def test_channel_output_arity_errors(kind, xs, ss):
    z = np.zeros(3)
    with pytest.raises(ConfigError):
        channel_output(kind, [z] * xs, [z] * ss, z)


def test_channel_output_length_mismatch():
    with pytest.raises(ConfigError):
        channel_output("single", [np.zeros(3), np.zeros(2)], [np.zeros(3)], np.zeros(3))


def test_draw_state_kinds():
    rng = np.random.default_rng(0)
    g = draw_state(InterferenceSpec.gaussian(1e4), 200_000, rng)
    assert g.var() == pytest.approx(1e4, rel=0.02)
    assert np.array_equal(draw_state(InterferenceSpec.fixed([1, 2, 3]), 3, rng), [1.0, 2.0, 3.0])
    with pytest.raises(ConfigError):
        draw_state(InterferenceSpec.fixed([1, 2]), 3, rng)
    saw = draw_state(InterferenceSpec.adversarial("sawtooth", 5.0), 1000, rng)
    assert saw.min() >= -5.0 and saw.max() < 5.0
    alt = draw_state(InterferenceSpec.adversarial("alternating", 2.0), 4, rng)
    assert np.array_equal(alt, [2.0, -2.0, 2.0, -2.0])
    ramp = draw_state(InterferenceSpec.adversarial("ramp", 2.0), 3, rng)
    assert np.allclose(ramp, [1.0, 2.0, 3.0])
    assert np.array_equal(draw_state(InterferenceSpec.gaussian(0.0), 3, rng), np.zeros(3))


def test_interference_spec_errors():
    with pytest.raises(ConfigError):
        InterferenceSpec("poisson")
    with pytest.raises(ConfigError):
        InterferenceSpec.adversarial("zigzag")
    with pytest.raises(ConfigError):
        InterferenceSpec.gaussian(-1.0)


@given(s1=st.floats(0.1, 10), s2=st.floats(0.1, 10), rho=st.floats(-0.99, 0.99))
def test_correlated_decomposition_covariance(s1, s2, rho):
    dec = correlated_decompose(s1, s2, rho)
    assert np.allclose(dec.covariance(), target_covariance(s1, s2, rho), rtol=1e-9, atol=1e-12)


def test_correlated_decomposition_draws():
    dec = correlated_decompose(2.0, 1.0, 0.6)
    a, b = dec.draw(400_000, np.random.default_rng(1))
    assert np.cov(a, b) == pytest.approx(target_covariance(2.0, 1.0, 0.6), abs=0.03)
    with pytest.raises(ConfigError):
        correlated_decompose(1.0, 1.0, 1.0)
