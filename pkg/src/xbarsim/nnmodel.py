"""Multilayer perceptron reference engines: float, trained, and fixed-point.

The float engine defines the functional semantics (threshold ties resolve to
-1 everywhere).  The quantized engine defines the exact integer datapath the
digital core must reproduce bit for bit: per-layer symmetric weight scaling,
widened accumulation, arithmetic-shift reduction to a signed 8-bit index and
a 256-entry lookup table.  Training is plain seeded SGD with a steep-sigmoid
surrogate standing in for the hard threshold.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

IDENTITY = "identity"
THRESHOLD = "threshold"
SIGMOID = "sigmoid"
ACTIVATIONS = (IDENTITY, THRESHOLD, SIGMOID)

# Steepness of the training surrogate for the hard threshold.
SURROGATE_K = 4.0
# Preactivation units per LUT index step: index = round-ish(32 * preact).
LUT_INDEX_SCALE = 32
# Accumulator width of the digital datapath.
ACCUMULATOR_BITS = 24

_ACT_CODE = {IDENTITY: 0, THRESHOLD: 1, SIGMOID: 2}
_ACT_FROM_CODE = {v: k for k, v in _ACT_CODE.items()}


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class LayerSpec:
    weights: np.ndarray          # (n_in, n_out) float64
    bias: np.ndarray             # (n_out,) float64
    activation: str = THRESHOLD

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be 2-D (n_in, n_out)")
        if self.bias.shape != (self.weights.shape[1],):
            raise ValueError("bias shape must match the output width")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_in(self):
        return self.weights.shape[0]

    @property
    def n_out(self):
        return self.weights.shape[1]


@dataclass
class NetworkSpec:
    layers: list

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(
                    f"layer widths disagree: {a.n_out} feeds {b.n_in}")

    @property
    def n_in(self):
        return self.layers[0].n_in

    @property
    def n_out(self):
        return self.layers[-1].n_out

    def dims(self):
        return [self.layers[0].n_in] + [l.n_out for l in self.layers]


def dot_product(weights, inputs):
    """Column dot products Sum_i w[i, j] * x[i]."""
    w = np.asarray(weights, dtype=np.float64)
    x = np.asarray(inputs, dtype=np.float64)
    if w.shape[0] != x.shape[-1]:
        raise ValueError("input width does not match weight rows")
    return x @ w


def apply_activation(kind, v):
    v = np.asarray(v, dtype=np.float64)
    if kind == IDENTITY:
        return v
    if kind == THRESHOLD:
        # ties (v == 0) resolve to -1; the shared rule for every engine
        return np.where(v > 0.0, 1.0, -1.0)
    if kind == SIGMOID:
        return 1.0 / (1.0 + np.exp(-v))
    raise ValueError(f"unknown activation {kind!r}")


def surrogate_activation(kind, v, k=SURROGATE_K):
    """Training-time soft stand-in; threshold becomes 2*sigmoid(k v) - 1."""
    v = np.asarray(v, dtype=np.float64)
    if kind == THRESHOLD:
        return 2.0 / (1.0 + np.exp(-k * v)) - 1.0
    return apply_activation(kind, v)


def _surrogate_grad(kind, out, k=SURROGATE_K):
    if kind == THRESHOLD:
        return 0.5 * k * (1.0 - out * out)
    if kind == SIGMOID:
        return out * (1.0 - out)
    return np.ones_like(out)


def forward(net: NetworkSpec, x, all_layers=False):
    """Float forward pass.  x is (n_in,) or (batch, n_in)."""
    x = np.asarray(x, dtype=np.float64)
    outs = []
    for layer in net.layers:
        v = dot_product(layer.weights, x) + layer.bias
        x = apply_activation(layer.activation, v)
        outs.append(x)
    return outs if all_layers else x


def init_network(dims, activations, seed=0):
    """Uniform +-sqrt(6/(fan_in+fan_out)) init, bias zero, seeded."""
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out, act in zip(dims, dims[1:], activations):
        lim = math.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-lim, lim, size=(n_in, n_out))
        layers.append(LayerSpec(w, np.zeros(n_out), act))
    return NetworkSpec(layers)


def one_hot_targets(labels, n_classes, output_activation):
    """Targets per output activation: +-1 for threshold, 1/0 otherwise."""
    labels = np.asarray(labels)
    low = -1.0 if output_activation == THRESHOLD else 0.0
    t = np.full((labels.shape[0], n_classes), low)
    t[np.arange(labels.shape[0]), labels] = 1.0
    return t


def train_sgd(net, inputs, targets, epochs, lr=0.05, seed=0, masks=None):
    """Per-sample SGD on mean squared error.  Returns (net', epoch losses).

    masks, when given, is one 0/1 array per layer multiplying the weight
    gradient (frozen-sparsity training for split topologies).  Single
    threaded and fully determined by the seed.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets disagree on sample count")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    layers = [LayerSpec(l.weights.copy(), l.bias.copy(), l.activation)
              for l in net.layers]
    if masks is not None and len(masks) != len(layers):
        raise ValueError("need one mask per layer")
    rng = np.random.default_rng(seed)
    losses = []
    for epoch in range(epochs):
        order = rng.permutation(inputs.shape[0])
        total = 0.0
        for idx in order:
            x = inputs[idx]
            acts = [x]
            for layer in layers:
                v = acts[-1] @ layer.weights + layer.bias
                acts.append(surrogate_activation(layer.activation, v))
            err = acts[-1] - targets[idx]
            total += 0.5 * float(err @ err)
            delta = err
            for li in range(len(layers) - 1, -1, -1):
                layer = layers[li]
                dv = delta * _surrogate_grad(layer.activation, acts[li + 1])
                gw = np.outer(acts[li], dv)
                if masks is not None and masks[li] is not None:
                    gw = gw * masks[li]
                if li > 0:
                    delta = layer.weights @ dv
                layer.weights -= lr * gw
                layer.bias -= lr * dv
        losses.append(total / inputs.shape[0])
        if not math.isfinite(losses[-1]) or (
                len(losses) > 1 and losses[-1] > 100.0 * (losses[0] + 1.0)):
            raise TrainingDiverged(f"loss diverged at epoch {epoch}")
    return NetworkSpec(layers), losses


# ---------------------------------------------------------------- quantized

@dataclass
class QuantizedLayer:
    qweights: np.ndarray         # (n_in, n_out) int32, symmetric signed range
    qbias: np.ndarray            # (n_out,) int32
    scale: float                 # float weight = q * scale
    activation: str
    reduce_shift: int            # arithmetic right shift before the LUT
    in_fullscale: float          # integer input value representing float 1.0
    out_fullscale: float
    lut: np.ndarray = field(default=None)  # (256,) int8 for LUT activations

    @property
    def n_in(self):
        return self.qweights.shape[0]

    @property
    def n_out(self):
        return self.qweights.shape[1]


@dataclass
class QuantizedNetwork:
    layers: list
    bits: int


def quantize_weights(weights, bits):
    """Symmetric per-tensor quantization: scale = max|w| / (2^(bits-1)-1)."""
    if not (2 <= bits <= 16):
        raise ValueError("bits must be in [2, 16]")
    w = np.asarray(weights, dtype=np.float64)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    scale = top / (2 ** (bits - 1) - 1) if top > 0.0 else 1.0
    q = np.round(w / scale).astype(np.int32)
    return q, scale


def build_lut(activation, out_fullscale=255):
    """256-entry signed 8-bit table over reduced sums s in [-128, 127].

    Entry layout: lut[s + 128].  Sigmoid entries are the centered byte
    round(255*sigmoid(s/32)) - 128; threshold entries are +-1 with the
    s <= 0 tie resolving to -1.
    """
    s = np.arange(-128, 128, dtype=np.float64)
    if activation == SIGMOID:
        vals = np.round(out_fullscale / (1.0 + np.exp(-s / LUT_INDEX_SCALE)))
        vals = vals - 128
    elif activation == THRESHOLD:
        vals = np.where(s > 0, 1, -1)
    else:
        raise ValueError(f"no LUT for activation {activation!r}")
    return np.clip(vals, -128, 127).astype(np.int8)


def _reduce_shift_for(in_fullscale, scale):
    if scale <= 0:
        return 0
    raw = round(math.log2(in_fullscale / (LUT_INDEX_SCALE * scale)))
    return int(min(max(raw, 0), ACCUMULATOR_BITS))


def quantize(net: NetworkSpec, bits, input_fullscale=255):
    """Quantize a float network for the fixed-point engine.

    input_fullscale is the integer code of a full-scale first-layer input
    (255 for sensor bytes).  Bias is a weight on an always-on input of
    value in_fullscale, so it quantizes with the layer.
    """
    qlayers = []
    fullscale = float(input_fullscale)
    for layer in net.layers:
        stacked = np.concatenate([layer.weights,
                                  layer.bias.reshape(1, -1)], axis=0)
        q, scale = quantize_weights(stacked, bits)
        qw, qb = q[:-1], q[-1]
        if layer.activation == IDENTITY:
            shift = 0
            lut = None
            out_full = fullscale / scale
        elif layer.activation == THRESHOLD:
            shift = _reduce_shift_for(fullscale, scale)
            lut = build_lut(THRESHOLD)
            out_full = 1.0
        else:
            shift = _reduce_shift_for(fullscale, scale)
            lut = build_lut(SIGMOID)
            out_full = 255.0
        qlayers.append(QuantizedLayer(qw, qb, scale, layer.activation,
                                      shift, fullscale, out_full, lut))
        fullscale = out_full
    return QuantizedNetwork(qlayers, bits)


def saturate_index(acc, shift):
    """Arithmetic right shift then saturate to the signed 8-bit index."""
    acc = np.asarray(acc)
    reduced = acc >> shift
    return np.clip(reduced, -128, 127).astype(np.int64)


def quantized_layer_apply(qlayer: QuantizedLayer, x):
    """One fixed-point layer: widened accumulate, reduce, look up."""
    x = np.asarray(x, dtype=np.int64)
    acc = x @ qlayer.qweights.astype(np.int64)
    acc = acc + qlayer.qbias.astype(np.int64) * int(round(qlayer.in_fullscale))
    if qlayer.activation == IDENTITY:
        return acc
    idx = saturate_index(acc, qlayer.reduce_shift)
    out = qlayer.lut.astype(np.int64)[idx + 128]
    if qlayer.activation == SIGMOID:
        # centered table entry back to the unsigned wire byte
        return out + 128
    return out


def quantized_forward(qnet: QuantizedNetwork, x, all_layers=False):
    """Fixed-point forward pass.  x holds first-layer integer codes."""
    x = np.asarray(x, dtype=np.int64)
    outs = []
    for ql in qnet.layers:
        x = quantized_layer_apply(ql, x)
        outs.append(x)
    return outs if all_layers else x


def dequantize(qnet: QuantizedNetwork) -> NetworkSpec:
    layers = []
    for ql in qnet.layers:
        layers.append(LayerSpec(ql.qweights * ql.scale, ql.qbias * ql.scale,
                                ql.activation))
    return NetworkSpec(layers)


def evaluate_accuracy(model, inputs, labels, engine="float", wire_r=0.0):
    """Classification accuracy by argmax under the chosen engine.

    inputs are raw sensor bytes (n, d) in [0, 255]; the float and crossbar
    engines scale them to [0, 1] volts, the quantized engine consumes the
    codes directly.
    """
    inputs = np.asarray(inputs)
    labels = np.asarray(labels)
    if inputs.shape[0] == 0:
        raise ValueError("empty dataset")
    if engine == "float":
        out = forward(model, inputs.astype(np.float64) / 255.0)
    elif engine == "quantized":
        out = quantized_forward(model, np.round(inputs).astype(np.int64))
    elif engine == "crossbar":
        from .crossbar import crossbar_network_forward
        out = crossbar_network_forward(model, inputs, wire_r=wire_r)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    pred = np.argmax(out, axis=-1)
    return float(np.mean(pred == labels))


# ------------------------------------------------------------ serialization

_NET_MAGIC = b"XBNET001"
_QNT_MAGIC = b"XBQNT001"
_MAT_MAGIC = b"XBMAT001"


def _pack_array(a, fmt):
    a = np.ascontiguousarray(a)
    return a.astype(fmt).tobytes()


def save_network(net: NetworkSpec, path):
    """Versioned flat binary dump; round-trips bit-exactly."""
    with open(path, "wb") as fh:
        fh.write(_NET_MAGIC)
        fh.write(struct.pack("<I", len(net.layers)))
        for l in net.layers:
            fh.write(struct.pack("<IIB", l.n_in, l.n_out,
                                 _ACT_CODE[l.activation]))
            fh.write(_pack_array(l.weights, "<f8"))
            fh.write(_pack_array(l.bias, "<f8"))


def load_network(path) -> NetworkSpec:
    with open(path, "rb") as fh:
        if fh.read(8) != _NET_MAGIC:
            raise ValueError("not a network file")
        (n_layers,) = struct.unpack("<I", fh.read(4))
        layers = []
        for _ in range(n_layers):
            n_in, n_out, code = struct.unpack("<IIB", fh.read(9))
            w = np.frombuffer(fh.read(8 * n_in * n_out), dtype="<f8")
            b = np.frombuffer(fh.read(8 * n_out), dtype="<f8")
            layers.append(LayerSpec(w.reshape(n_in, n_out).copy(), b.copy(),
                                    _ACT_FROM_CODE[code]))
    return NetworkSpec(layers)


def save_quantized(qnet: QuantizedNetwork, path):
    with open(path, "wb") as fh:
        fh.write(_QNT_MAGIC)
        fh.write(struct.pack("<BI", qnet.bits, len(qnet.layers)))
        for l in qnet.layers:
            fh.write(struct.pack("<IIBi d d d", l.n_in, l.n_out,
                                 _ACT_CODE[l.activation], l.reduce_shift,
                                 l.scale, l.in_fullscale, l.out_fullscale))
            fh.write(_pack_array(l.qweights, "<i4"))
            fh.write(_pack_array(l.qbias, "<i4"))
            fh.write(struct.pack("<B", 0 if l.lut is None else 1))
            if l.lut is not None:
                fh.write(_pack_array(l.lut, "<i1"))


def load_quantized(path) -> QuantizedNetwork:
    with open(path, "rb") as fh:
        if fh.read(8) != _QNT_MAGIC:
            raise ValueError("not a quantized network file")
        bits, n_layers = struct.unpack("<BI", fh.read(5))
        layers = []
        for _ in range(n_layers):
            rec = struct.unpack("<IIBi d d d", fh.read(struct.calcsize("<IIBi d d d")))
            n_in, n_out, code, shift, scale, in_fs, out_fs = rec
            qw = np.frombuffer(fh.read(4 * n_in * n_out), dtype="<i4")
            qb = np.frombuffer(fh.read(4 * n_out), dtype="<i4")
            (has_lut,) = struct.unpack("<B", fh.read(1))
            lut = None
            if has_lut:
                lut = np.frombuffer(fh.read(256), dtype="<i1").copy()
            layers.append(QuantizedLayer(
                qw.reshape(n_in, n_out).copy(), qb.copy(), scale,
                _ACT_FROM_CODE[code], shift, in_fs, out_fs, lut))
    return QuantizedNetwork(layers, bits)


def save_matrix(m, path):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(_MAT_MAGIC)
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(_pack_array(m, "<f8"))


def load_matrix(path):
    with open(path, "rb") as fh:
        if fh.read(8) != _MAT_MAGIC:
            raise ValueError("not a matrix file")
        rows, cols = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(8 * rows * cols), dtype="<f8")
    return data.reshape(rows, cols).copy()
