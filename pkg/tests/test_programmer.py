"""Program-and-verify tests: divider read, feedback convergence, statistics."""

import numpy as np
import pytest

from xbarsim.crossbar import pairs_to_weights, weights_to_pairs
from xbarsim.device import DeviceParams, small_signal_conductance
from xbarsim.programmer import (
    ProgrammingConfig,
    program_pairs,
    program_targets,
    read_device,
)


def test_read_divider_worked_example():
    # fully-on device: R = 125 kOhm against the 100 kOhm sense resistor
    params = DeviceParams()
    g_hat, code = read_device(params, 1.0)
    assert code == 113  # round(0.5 * 1e5 / 2.25e5 / 0.5 * 255)
    v_hat = 113 / 255 * 0.5
    r_hat = 1e5 * (0.5 - v_hat) / v_hat
    assert g_hat == pytest.approx(1.0 / r_hat, rel=1e-12)
    assert g_hat == pytest.approx(8e-6, rel=6e-3)


def test_read_floor_gives_code_zero():
    # minimum conductance drops almost nothing across the sense resistor
    params = DeviceParams()
    g_hat, code = read_device(params, 0.0)
    assert code == 0
    assert g_hat == 0.0


def test_read_monotone_in_state():
    params = DeviceParams()
    reads = [read_device(params, x)[0] for x in np.linspace(0.0, 1.0, 41)]
    assert all(b >= a for a, b in zip(reads, reads[1:]))


def test_program_single_mid_target_noiseless():
    params = DeviceParams()
    target = 0.5 * (params.g_min + params.g_max)
    report = program_targets(params, [target], no_variation=True)
    assert bool(report.converged[0])
    # coarse ramp from fresh state takes ~40 one-ns steps, then refinement
    assert 30 <= int(report.pulses[0]) <= 120
    tol = ProgrammingConfig().tolerance(params)
    assert abs(report.g_read[0] - target) <= tol


def test_program_full_scale_pulse_count():
    # driving to the top of the window mirrors the 4.25 V switching ramp
    params = DeviceParams()
    report = program_targets(params, [params.g_max * 0.98], no_variation=True)
    assert bool(report.converged[0])
    assert 60 <= int(report.pulses[0]) <= 160


def test_programming_is_deterministic():
    params = DeviceParams()
    targets = np.linspace(params.g_min, params.g_max, 7)
    a = program_targets(params, targets, seed=42)
    b = program_targets(params, targets, seed=42)
    assert np.array_equal(a.state, b.state)
    assert np.array_equal(a.pulses, b.pulses)
    c = program_targets(params, targets, seed=43)
    assert not np.array_equal(a.state, c.state)


def test_no_variation_matches_sigma_zero():
    params = DeviceParams()
    targets = np.linspace(params.g_min, params.g_max, 5)
    quiet = program_targets(params, targets, no_variation=True)
    zeroed = program_targets(
        params, targets,
        config=ProgrammingConfig(sigma=0.0), seed=9)
    assert np.array_equal(quiet.state, zeroed.state)


def test_programming_statistics_with_noise():
    params = DeviceParams()
    rng = np.random.default_rng(0)
    targets = rng.uniform(params.g_min, params.g_max, size=200)
    report = program_targets(params, targets, seed=1)
    assert report.fraction_converged >= 0.95
    assert report.mean_pulses < 200
    tol = ProgrammingConfig().tolerance(params)
    hit = report.converged
    assert np.all(np.abs(report.g_read[hit] - targets[hit]) <= tol + 1e-18)


def test_programmed_weights_land_near_targets():
    params = DeviceParams()
    rng = np.random.default_rng(2)
    w = rng.uniform(-1.0, 1.0, size=(6, 4))
    gp, gm = weights_to_pairs(w, params)
    gp_hat, gm_hat, report = program_pairs(params, gp, gm, seed=3)
    assert report.fraction_converged >= 0.95
    w_hat = pairs_to_weights(gp_hat, gm_hat, params)
    # each pair leg may be off by one tolerance window plus ADC rounding
    assert np.max(np.abs(w_hat - w)) <= 3.0 / 128


def test_program_rejects_bad_targets():
    params = DeviceParams()
    with pytest.raises(ValueError):
        program_targets(params, [params.g_max * 1.5])
    with pytest.raises(ValueError):
        program_targets(params, [-1e-9])
    with pytest.raises(ValueError):
        program_targets(params, np.empty(0))
