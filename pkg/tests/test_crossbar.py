"""Crossbar array tests: pair mapping, readout closed form, mesh solver."""

import numpy as np
import pytest

from xbarsim.crossbar import (
    crossbar_layer_forward,
    crossbar_network_forward,
    dac_convert,
    ideal_column_voltage,
    layer_to_pairs,
    nonideal_solve,
    pairs_to_weights,
    threshold_readout,
    weights_to_pairs,
)
from xbarsim.device import DeviceParams
from xbarsim.nnmodel import THRESHOLD, forward, init_network


def test_pair_mapping_worked_example():
    params = DeviceParams()
    gp, gm = weights_to_pairs(np.array([-0.5]), params)
    assert gp[0] == pytest.approx(2.006e-6, rel=1e-9)
    assert gm[0] == pytest.approx(6.002e-6, rel=1e-9)
    # constant pair sum = G_min + G_max for every weight
    w = np.linspace(-1.0, 1.0, 11)
    gp, gm = weights_to_pairs(w, params)
    assert np.allclose(gp + gm, params.g_min + params.g_max, rtol=1e-12)


def test_pair_mapping_roundtrip_and_range():
    params = DeviceParams()
    w = np.linspace(-1.0, 1.0, 21).reshape(7, 3)
    gp, gm = weights_to_pairs(w, params)
    assert gp.min() >= params.g_min - 1e-18
    assert gp.max() <= params.g_max + 1e-18
    assert np.allclose(pairs_to_weights(gp, gm, params), w, atol=1e-12)
    with pytest.raises(ValueError):
        weights_to_pairs(np.array([1.5]), params)


def test_single_synapse_column_voltage():
    # one pair (8e-6, 1e-6) driven at 0.5 V: 0.5 * 7e-6 / 9e-6
    dp = ideal_column_voltage(np.array([[8e-6]]), np.array([[1e-6]]),
                              np.array([0.5]))
    assert dp[0] == pytest.approx(0.5 * 7.0 / 9.0, rel=1e-12)


def test_column_voltage_sign_matches_weighted_sum():
    rng = np.random.default_rng(11)
    params = DeviceParams()
    for _ in range(25):
        w = rng.uniform(-1.0, 1.0, size=(12, 5))
        v = rng.uniform(0.0, 1.0, size=12)
        gp, gm = weights_to_pairs(w, params)
        dp = ideal_column_voltage(gp, gm, v)
        ref = v @ w
        keep = np.abs(ref) > 1e-9
        assert np.array_equal(np.sign(dp[keep]), np.sign(ref[keep]))


def test_threshold_readout_tie_goes_low():
    out = threshold_readout(np.array([-0.2, 0.0, 1e-12, 0.3]))
    assert np.array_equal(out, [-1.0, -1.0, 1.0, 1.0])


def test_dac_convert():
    v = dac_convert(np.array([0, 128, 255]))
    assert v[0] == 0.0
    assert v[1] == pytest.approx(128.0 / 255.0, rel=1e-12)
    assert v[2] == 1.0
    with pytest.raises(ValueError):
        dac_convert(np.array([256]))
    with pytest.raises(ValueError):
        dac_convert(np.array([-1]))


def _dense_mesh_oracle(g_plus, g_minus, v, wire_r):
    """Independent dense assembly of the segmented mesh, nested loops."""
    m, n = g_plus.shape
    p = 2 * m
    g_dev = np.zeros((p, n))
    src = np.zeros(p)
    for i in range(m):
        g_dev[2 * i] = g_plus[i]
        g_dev[2 * i + 1] = g_minus[i]
        src[2 * i] = v[i]
        src[2 * i + 1] = -v[i]
    gw = 1.0 / wire_r
    n_nodes = 2 * p * n
    row = lambda pp, jj: pp * n + jj
    col = lambda pp, jj: p * n + jj * p + pp
    a = np.zeros((n_nodes, n_nodes))
    b = np.zeros(n_nodes)

    def edge(x, y, g):
        a[x, x] += g
        a[y, y] += g
        a[x, y] -= g
        a[y, x] -= g

    for pp in range(p):
        a[row(pp, 0), row(pp, 0)] += gw
        b[row(pp, 0)] += gw * src[pp]
        for jj in range(n - 1):
            edge(row(pp, jj), row(pp, jj + 1), gw)
        for jj in range(n):
            edge(row(pp, jj), col(pp, jj), g_dev[pp, jj])
    for jj in range(n):
        for pp in range(p - 1):
            edge(col(pp, jj), col(pp + 1, jj), gw)
    sol = np.linalg.solve(a, b)
    return np.array([sol[col(p - 1, jj)] for jj in range(n)])


def test_nonideal_matches_dense_oracle():
    rng = np.random.default_rng(3)
    params = DeviceParams()
    w = rng.uniform(-1.0, 1.0, size=(3, 2))
    v = rng.uniform(0.0, 1.0, size=3)
    gp, gm = weights_to_pairs(w, params)
    for wire_r in (0.5, 5.0, 50.0):
        got = nonideal_solve(gp, gm, v, wire_r)
        want = _dense_mesh_oracle(gp, gm, v, wire_r)
        assert np.allclose(got, want, rtol=1e-10, atol=1e-15)


def test_zero_wire_resistance_equals_closed_form():
    rng = np.random.default_rng(4)
    params = DeviceParams()
    w = rng.uniform(-1.0, 1.0, size=(16, 8))
    v = rng.uniform(0.0, 1.0, size=16)
    gp, gm = weights_to_pairs(w, params)
    ideal = ideal_column_voltage(gp, gm, v)
    assert np.allclose(nonideal_solve(gp, gm, v, 0.0), ideal,
                       rtol=1e-12, atol=1e-15)
    # vanishing wire resistance converges to the closed form (bound is
    # loose because the near-singular mesh leaves solver noise ~1e-7)
    near = nonideal_solve(gp, gm, v, 1e-6)
    assert np.max(np.abs(near - ideal)) < 1e-5


def test_wire_error_grows_with_resistance():
    rng = np.random.default_rng(5)
    params = DeviceParams()
    w = rng.uniform(-1.0, 1.0, size=(16, 8))
    v = rng.uniform(0.0, 1.0, size=16)
    gp, gm = weights_to_pairs(w, params)
    ideal = ideal_column_voltage(gp, gm, v)
    errs = [np.max(np.abs(nonideal_solve(gp, gm, v, r) - ideal))
            for r in (1e-3, 1e-2, 1e-1)]
    assert errs[0] < errs[1] < errs[2]
    assert errs[0] < 1e-6


def test_wire_loss_shrinks_uniform_column():
    # all-positive drive: IR drop can only pull the column down
    params = DeviceParams()
    w = np.full((8, 4), 1.0)
    v = np.full(8, 0.5)
    gp, gm = weights_to_pairs(w, params)
    ideal = ideal_column_voltage(gp, gm, v)
    lossy = nonideal_solve(gp, gm, v, 10.0)
    assert np.all(lossy < ideal)
    assert np.all(lossy > 0.0)


def test_full_size_mesh_solve_runs():
    rng = np.random.default_rng(6)
    params = DeviceParams()
    w = rng.uniform(-1.0, 1.0, size=(129, 64))
    v = rng.uniform(0.0, 1.0, size=129)
    gp, gm = weights_to_pairs(w, params)
    out = nonideal_solve(gp, gm, v, 1.0)
    assert out.shape == (64,)
    assert np.all(np.isfinite(out))
    # ohm-scale wiring against kilo-ohm devices is a small perturbation
    ideal = ideal_column_voltage(gp, gm, v)
    assert np.max(np.abs(out - ideal)) < 5e-3


def test_nonideal_solve_validation():
    params = DeviceParams()
    gp, gm = weights_to_pairs(np.zeros((2, 2)), params)
    with pytest.raises(ValueError):
        nonideal_solve(gp, gm, np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        nonideal_solve(gp, gm, np.zeros(3), 1.0)


def test_layer_to_pairs_normalizes_with_bias():
    params = DeviceParams()
    w = np.array([[2.0, -4.0]])
    b = np.array([1.0, 8.0])
    gp, gm = layer_to_pairs(w, b, params)
    assert gp.shape == (2, 2)  # one weight row plus the bias row
    back = pairs_to_weights(gp, gm, params)
    assert back[0, 1] == pytest.approx(-0.5)  # -4 / 8
    assert back[1, 1] == pytest.approx(1.0)  # 8 / 8
    # all-zero layer maps to mid conductance and reads low after threshold
    gp0, gm0 = layer_to_pairs(np.zeros((1, 1)), np.zeros(1), params)
    assert np.allclose(gp0, gm0)


def test_layer_forward_matches_float_signs():
    rng = np.random.default_rng(7)
    w = rng.uniform(-1.0, 1.0, size=(10, 6))
    b = rng.uniform(-0.5, 0.5, size=6)
    x = rng.uniform(0.0, 1.0, size=(5, 10))
    out = crossbar_layer_forward(w, b, x)
    ref = np.where(x @ w + b > 0.0, 1.0, -1.0)
    assert np.array_equal(out, ref)


def test_network_forward_matches_float_engine():
    rng = np.random.default_rng(8)
    net = init_network([12, 9, 4], [THRESHOLD, THRESHOLD], seed=1)
    codes = rng.integers(0, 256, size=(20, 12))
    analog = crossbar_network_forward(net, codes, wire_r=0.0)
    ref = forward(net, codes.astype(np.float64) / 255.0)
    assert np.array_equal(analog, ref)


def test_network_forward_rejects_sigmoid():
    net = init_network([4, 3], ["sigmoid"], seed=0)
    with pytest.raises(ValueError):
        crossbar_network_forward(net, np.zeros((1, 4), dtype=int))
