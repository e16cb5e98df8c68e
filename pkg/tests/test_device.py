import math

import numpy as np
import pytest

from xbarsim import device
from xbarsim.device import DeviceParams


@pytest.fixture
def params():
    return DeviceParams()


def test_conductance_corners(params):
    # a1*b = 8e-6 S, so minimum resistance is exactly 125 kOhm.
    assert params.g_max == pytest.approx(8e-6, rel=1e-12)
    assert params.r_min == pytest.approx(125e3, rel=1e-12)
    assert params.g_max / params.g_min == pytest.approx(1000.0, rel=1e-12)


def test_small_signal_clamp(params):
    g = device.small_signal_conductance(params, np.array([0.0, 0.001, 0.5, 1.0]))
    assert g[0] == params.g_min           # clamped from below
    assert g[1] == pytest.approx(params.g_min)
    assert g[2] == pytest.approx(4e-6)
    assert g[3] == pytest.approx(params.g_max)


def test_device_current_example(params):
    # x=1, V=0.1: 1.6e-4 * sinh(0.005) ~= 8.00e-7 A
    i = device.device_current(params, 1.0, 0.1)
    assert i == pytest.approx(8.0e-7, rel=1e-4)
    # odd symmetry through the sinh law with equal branch prefactors
    assert device.device_current(params, 1.0, -0.1) == pytest.approx(-i, rel=1e-12)


def test_current_scales_with_state(params):
    i_half = device.device_current(params, 0.5, 0.2)
    i_full = device.device_current(params, 1.0, 0.2)
    assert i_full == pytest.approx(2 * i_half, rel=1e-12)


def test_subthreshold_leaves_state_bit_identical(params):
    # |V| <= v_p gives a drive of exactly zero: no drift, no rounding.
    for v in (0.0, 0.5, -0.5, 3.999, -3.999, 4.0, -4.0):
        for x in (0.0, 0.001, 0.37, 0.9999, 1.0):
            assert device.step_state(params, x, v, 1e-6) == x


def test_switching_time_calibration(params):
    # Published fit: full range in ~80 ns at 4.25 V, defaults within +-20%.
    t_up = device.switching_time(params, 4.25, params.x0, 0.99)
    assert 64e-9 <= t_up <= 96e-9
    t_dn = device.switching_time(params, -4.25, 1.0, 0.01)
    assert 64e-9 <= t_dn <= 96e-9


def test_switching_time_oracle(params):
    # Away from the window the rate is constant: A_p*(e^V - e^Vp).
    rate = params.a_p * (math.exp(4.25) - math.exp(4.0))
    t_pred = (params.x_p - params.x0) / rate
    t_sim = device.switching_time(params, 4.25, params.x0, params.x_p)
    assert t_sim == pytest.approx(t_pred, rel=0.05)


def test_state_clamped_to_unit_interval(params):
    assert device.step_state(params, 0.999, 4.5, 1e-6) <= 1.0
    assert device.step_state(params, 0.001, -4.5, 1e-6) >= 0.0


def test_window_slows_near_rail(params):
    dx_mid = device.step_state(params, 0.5, 4.25, 1e-9) - 0.5
    x_hi = 0.995
    dx_hi = device.step_state(params, x_hi, 4.25, 1e-9) - x_hi
    assert 0 < dx_hi < dx_mid


def test_monotone_in_drive(params):
    x1 = device.step_state(params, 0.3, 4.1, 1e-8)
    x2 = device.step_state(params, 0.3, 4.3, 1e-8)
    x3 = device.step_state(params, 0.3, 4.5, 1e-8)
    assert 0.3 < x1 < x2 < x3


def test_step_state_validates_args(params):
    with pytest.raises(ValueError):
        device.step_state(params, 0.5, 1.0, -1e-9)
    with pytest.raises(ValueError):
        device.step_state(params, 0.5, 1.0, 1e-9, dt=0.0)
    with pytest.raises(ValueError):
        device.step_state(params, 1.5, 1.0, 1e-9)


def test_rate_scale_scales_time(params):
    fast = device.with_rate_scale(params, 2.0)
    t_base = device.switching_time(params, 4.25, 0.001, 0.9)
    t_fast = device.switching_time(fast, 4.25, 0.001, 0.9)
    assert t_fast == pytest.approx(t_base / 2, rel=0.05)


def test_state_for_conductance_roundtrip(params):
    for g in (params.g_min * 2, 4e-6, params.g_max):
        x = device.state_for_conductance(params, g)
        assert device.small_signal_conductance(params, x) == pytest.approx(g, rel=1e-12)
    with pytest.raises(ValueError):
        device.state_for_conductance(params, params.g_max * 1.1)
