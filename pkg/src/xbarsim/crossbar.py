"""Analog crossbar: differential pairs, dot-product readout, wire parasitics.

Each logical input drives a true and an inverted row; every synapse is a
conductance pair, with weights mapped at constant pair sum so that all
columns share the same denominator.  A floating column then settles to

    DP_j = sum_i v_i (g+_ij - g-_ij) / sum_i (g+_ij + g-_ij)

which preserves the sign of the weighted sum.  The nonideal path solves the
full resistive mesh (rows and columns segmented by wire resistance) as a
sparse SPD nodal system; at zero wire resistance each line collapses to a
supernode and the same assembly degenerates to the weighted average.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .device import DeviceParams
from .nnmodel import THRESHOLD, NetworkSpec

DAC_VREF = 1.0
DEFAULT_WIRE_R = 1.0  # ohm per segment between adjacent cross-points


@dataclass(frozen=True)
class CrossbarDesign:
    m_inputs: int = 128
    n_outputs: int = 64
    bias_enabled: bool = True
    wire_r: float = DEFAULT_WIRE_R
    device: DeviceParams = field(default_factory=DeviceParams)

    @property
    def n_rows(self):
        # logical input rows plus the always-on bias pair
        return self.m_inputs + (1 if self.bias_enabled else 0)


def weights_to_pairs(weights, params: DeviceParams):
    """Map normalized weights in [-1, 1] to constant-sum conductance pairs.

    g+- = G_mid +- w * (G_max - G_min) / 2, so g+ + g- is the same for every
    synapse and sign(DP) equals sign(sum w x) in the ideal array.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size and float(np.max(np.abs(w))) > 1.0 + 1e-12:
        raise ValueError("weights must be normalized to [-1, 1]")
    g_mid = 0.5 * (params.g_min + params.g_max)
    half_span = 0.5 * (params.g_max - params.g_min)
    return g_mid + w * half_span, g_mid - w * half_span


def pairs_to_weights(g_plus, g_minus, params: DeviceParams):
    return (np.asarray(g_plus) - np.asarray(g_minus)) / (params.g_max - params.g_min)


def ideal_column_voltage(g_plus, g_minus, v):
    """Closed-form floating-column voltage of the differential array."""
    g_plus = np.asarray(g_plus, dtype=np.float64)
    g_minus = np.asarray(g_minus, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if g_plus.shape != g_minus.shape:
        raise ValueError("pair arrays must have the same shape")
    if v.shape[-1] != g_plus.shape[0]:
        raise ValueError("need one drive voltage per pair row")
    den = np.sum(g_plus + g_minus, axis=0)
    if np.any(den <= 0.0):
        raise ValueError("column with non-positive total conductance")
    return (v @ (g_plus - g_minus)) / den


def _interleave_rows(g_plus, g_minus, v):
    """Expand pairs to physical rows: even rows +v via g+, odd rows -v via g-."""
    m, n = g_plus.shape
    g = np.empty((2 * m, n))
    g[0::2] = g_plus
    g[1::2] = g_minus
    src = np.empty(2 * m)
    src[0::2] = v
    src[1::2] = -v
    return g, src


def nonideal_solve(g_plus, g_minus, v, wire_r=DEFAULT_WIRE_R):
    """Column voltages of the segmented resistive mesh.

    Rows are driven by ideal sources at their entry; wire_r is the
    resistance of each segment between adjacent cross-points (and from the
    driver to the first cross-point).  The sense node is the column foot,
    which draws no current.  wire_r == 0 collapses each line to a supernode;
    the assembled system is solved the same way.
    """
    g_plus = np.asarray(g_plus, dtype=np.float64)
    g_minus = np.asarray(g_minus, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if wire_r < 0.0:
        raise ValueError("wire resistance cannot be negative")
    if v.ndim != 1 or v.shape[0] != g_plus.shape[0]:
        raise ValueError("need one drive voltage per pair row")
    g_dev, src = _interleave_rows(g_plus, g_minus, v)
    p_rows, n_cols = g_dev.shape

    if wire_r == 0.0:
        den = sp.diags(g_dev.sum(axis=0), format="csc")
        rhs = g_dev.T @ src
        return spla.spsolve(den, rhs)

    g_w = 1.0 / wire_r
    n_nodes = 2 * p_rows * n_cols

    def row_node(p, j):
        return p * n_cols + j

    def col_node(p, j):
        return p_rows * n_cols + j * p_rows + p

    ii, jj, vv = [], [], []
    diag = np.zeros(n_nodes)
    rhs = np.zeros(n_nodes)

    def stamp_edge(a, b, g):
        # a, b are equal-length index arrays; g scalar or array
        np.add.at(diag, a, g)
        np.add.at(diag, b, g)
        ii.append(a)
        jj.append(b)
        vv.append(np.broadcast_to(-np.asarray(g, dtype=np.float64), a.shape))
        ii.append(b)
        jj.append(a)
        vv.append(np.broadcast_to(-np.asarray(g, dtype=np.float64), a.shape))

    ps = np.arange(p_rows)
    js = np.arange(n_cols)

    # driver -> first cross-point of each row line (Dirichlet source)
    first = row_node(ps, 0)
    np.add.at(diag, first, g_w)
    np.add.at(rhs, first, g_w * src)

    # row line segments
    if n_cols > 1:
        pg, jg = np.meshgrid(ps, js[:-1], indexing="ij")
        stamp_edge(row_node(pg.ravel(), jg.ravel()),
                   row_node(pg.ravel(), jg.ravel() + 1), g_w)

    # column line segments
    if p_rows > 1:
        pg, jg = np.meshgrid(ps[:-1], js, indexing="ij")
        stamp_edge(col_node(pg.ravel(), jg.ravel()),
                   col_node(pg.ravel() + 1, jg.ravel()), g_w)

    # devices join each row node to its column node
    pg, jg = np.meshgrid(ps, js, indexing="ij")
    stamp_edge(row_node(pg.ravel(), jg.ravel()),
               col_node(pg.ravel(), jg.ravel()), g_dev.ravel())

    ii = np.concatenate(ii + [np.arange(n_nodes)])
    jj = np.concatenate(jj + [np.arange(n_nodes)])
    vv = np.concatenate(vv + [diag])
    a = sp.coo_matrix((vv, (ii, jj)), shape=(n_nodes, n_nodes)).tocsc()
    sol = spla.spsolve(a, rhs)
    return sol[[col_node(p_rows - 1, j) for j in range(n_cols)]]


def threshold_readout(dp):
    """Inverter-pair readout: positive column -> +1, tie and below -> -1."""
    dp = np.asarray(dp, dtype=np.float64)
    return np.where(dp > 0.0, 1.0, -1.0)


def dac_convert(codes, v_ref=DAC_VREF):
    """8-bit input DAC: v = code/255 * v_ref; the inverted line is exactly -v."""
    codes = np.asarray(codes)
    if np.any(codes < 0) or np.any(codes > 255):
        raise ValueError("DAC codes must lie in [0, 255]")
    return codes.astype(np.float64) / 255.0 * v_ref


def layer_to_pairs(weights, bias, params: DeviceParams, bias_enabled=True):
    """Normalize a float layer (bias included) and map it to pairs.

    The bias becomes one extra pair row driven at +1 V.  Normalizing by the
    largest magnitude preserves every sign, so threshold decisions survive.
    """
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    stacked = np.concatenate([w, b.reshape(1, -1)], axis=0) if bias_enabled else w
    top = float(np.max(np.abs(stacked))) if stacked.size else 0.0
    norm = stacked / top if top > 0.0 else stacked
    return weights_to_pairs(norm, params)


def crossbar_layer_forward(weights, bias, v_in, params=None, wire_r=0.0,
                           bias_enabled=True):
    """One crossbar layer: pairs, column voltages, threshold readout.

    v_in is (m,) or (batch, m) in volts; the bias row is driven at +1 V.
    """
    params = params or DeviceParams()
    g_plus, g_minus = layer_to_pairs(weights, bias, params, bias_enabled)
    v_in = np.asarray(v_in, dtype=np.float64)
    single = v_in.ndim == 1
    batch = v_in.reshape(1, -1) if single else v_in
    if bias_enabled:
        batch = np.concatenate(
            [batch, np.ones((batch.shape[0], 1))], axis=1)
    if wire_r == 0.0:
        dp = ideal_column_voltage(g_plus, g_minus, batch)
    else:
        dp = np.stack([nonideal_solve(g_plus, g_minus, row, wire_r)
                       for row in batch])
    out = threshold_readout(dp)
    return out[0] if single else out


def crossbar_network_forward(net: NetworkSpec, sensor_codes, wire_r=0.0,
                             params=None):
    """Run an all-threshold network on the analog engine.

    First-layer inputs are 8-bit sensor codes through the DAC; hidden
    activations travel as +-1 V rails.
    """
    for layer in net.layers:
        if layer.activation != THRESHOLD:
            raise ValueError("the analog engine only evaluates threshold layers")
    x = dac_convert(sensor_codes)
    for layer in net.layers:
        x = crossbar_layer_forward(layer.weights, layer.bias, x,
                                   params=params, wire_r=wire_r)
    return x
