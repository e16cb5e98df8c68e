"""Compiles networks onto grids of fixed-size neural cores.

Splitting: a layer wider than a core becomes input-block tiles computing
identity partial sums plus a combiner that adds the partials and applies
the layer's activation (the bias rides the first block, so the function is
unchanged).  Packing: sub-layers of different pipeline stages may share a
core when the shared resource fits (physical rows and columns for a
crossbar, synapse-memory slots for an SRAM core); sub-layers of the same
stage never share.  Replication: the instance is duplicated until the
slowest core, including its output routing, keeps up with the required
pattern rate.

Idealization recorded here: crossbar tiles forward analog partial sums
re-encoded through the readout; on the interconnect those travel at the
same single-bit-per-neuron width as threshold outputs.  Digital partials
travel at full accumulator width (24 bits) so split arithmetic stays
exact.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cores import DigitalCoreConfig, MemristorCoreConfig, transfer_cycles
from .nnmodel import (
    IDENTITY,
    LayerSpec,
    NetworkSpec,
    forward,
    train_sgd,
)

DIGITAL_PARTIAL_BITS = 24
DIGITAL_OUTPUT_BITS = 8


@dataclass(frozen=True)
class SubLayer:
    """One schedulable unit: a layer tile, a combiner chunk, or a bank.

    kind "dense": ordinary layer slice (inputs broadcast to every neuron).
    kind "banked": each neuron owns fan_in private inputs (combiners after
    splitting, and parallel per-neuron networks).
    """

    stage: int
    kind: str
    inputs: int
    neurons: int
    has_bias: bool
    fan_in: int = 0
    source: int = 0  # original layer index
    is_partial: bool = False  # output is a raw partial sum
    key: str = ""  # producer tag, matched against consumer_key
    consumer_key: str = ""  # "" means the system output
    offset: int = 0  # first neuron index within the producing layer
    in_offset: int = 0  # first consumed input index (dense tiles)


@dataclass
class CorePlacement:
    core_id: int
    core_type: str  # digital | memristor_dac | memristor_plain
    entries: list = field(default_factory=list)
    rows_used: int = 0
    cols_used: int = 0
    slots_used: int = 0

    def stages(self):
        return {e.stage for e in self.entries}


@dataclass
class CoreAllocation:
    engine: str
    cores: list
    stage_latencies: list
    max_core_latency: float
    replication: int = 1
    required_rate: float = 0.0
    rate_satisfied: bool = True

    @property
    def instance_cores(self):
        return len(self.cores)

    @property
    def total_cores(self):
        return self.instance_cores * self.replication

    @property
    def throughput(self):
        return self.replication / self.max_core_latency


def _blocks(total, size):
    """Max-fill split of `total` into chunks of at most `size`."""
    if total <= 0:
        return []
    n = math.ceil(total / size)
    out = [size] * (n - 1)
    out.append(total - size * (n - 1))
    return out


def split_layer_dims(n_in, n_out, has_bias, m_inputs, n_neurons,
                     bias_needs_slot, source=0, key_prefix="L"):
    """Tile one dense layer; returns a list of stages of SubLayers.

    bias_needs_slot: SRAM cores store the bias like a synapse, so it takes
    one slot of the first input block; crossbar cores have a dedicated
    bias row and the split counts real inputs only.
    """
    slot_total = n_in + (1 if has_bias and bias_needs_slot else 0)
    slot_blocks = _blocks(slot_total, m_inputs)
    n_blocks = len(slot_blocks)
    groups = _blocks(n_out, n_neurons)
    own = f"{key_prefix}{source}"
    if n_blocks == 1:
        tiles = []
        g_off = 0
        for g in groups:
            tiles.append(SubLayer(stage=0, kind="dense", inputs=n_in,
                                  neurons=g, has_bias=has_bias, source=source,
                                  key=own, offset=g_off))
            g_off += g
        return [tiles]
    # bias occupies the first block; later blocks carry pure partials
    tiles = []
    row = 0
    for b, slots in enumerate(slot_blocks):
        real = slots - (1 if b == 0 and has_bias and bias_needs_slot else 0)
        g_off = 0
        for g in groups:
            tiles.append(SubLayer(
                stage=0, kind="dense", inputs=real, neurons=g,
                has_bias=(b == 0 and has_bias), source=source,
                is_partial=True, key=own, consumer_key=f"{own}c0",
                offset=g_off, in_offset=row))
            g_off += g
        row += real
    stages = [tiles]
    # combiner tree: fan-in shrinks by the row budget per level
    fan = n_blocks
    level = 0
    while True:
        last = fan <= m_inputs
        chunk = fan if last else m_inputs
        pieces = math.ceil(fan / m_inputs)
        stages.append([SubLayer(
            stage=len(stages), kind="banked", inputs=chunk * n_out * pieces,
            neurons=n_out * pieces, has_bias=False, fan_in=chunk,
            source=source, is_partial=not last, key=f"{own}c{level}",
            consumer_key="" if last else f"{own}c{level + 1}")])
        if last:
            break
        fan = pieces
        level += 1
    return stages


def split_network_dims(layer_dims, m_inputs, n_neurons, bias_needs_slot):
    """Tile every layer of a network description.

    layer_dims: list of ("dense", n_in, n_out, has_bias) or
    ("banked", fan_in, n_out, has_bias) tuples, in pipeline order.
    """
    stages = []
    for idx, (kind, a, b, has_bias) in enumerate(layer_dims):
        own = f"L{idx}"
        nxt = f"L{idx + 1}" if idx + 1 < len(layer_dims) else ""
        if kind == "banked":
            if a > m_inputs:
                raise ValueError("banked fan-in exceeds the core row budget")
            sub = [SubLayer(stage=len(stages), kind="banked", inputs=a * b,
                            neurons=b, has_bias=has_bias, fan_in=a,
                            source=idx, key=own, consumer_key=nxt)]
            stages.append(sub)
            continue
        if kind != "dense":
            raise ValueError(f"unknown layer kind: {kind}")
        local = split_layer_dims(a, b, has_bias, m_inputs, n_neurons,
                                 bias_needs_slot, source=idx)
        base = len(stages)
        for off, stage in enumerate(local):
            out = []
            for s in stage:
                consumer = s.consumer_key or nxt
                out.append(replace(s, stage=base + off, consumer_key=consumer))
            stages.append(out)
    return stages


def _banked_units(sub, m_inputs, n_neurons, pool, engine):
    """Chunk a banked sub-layer into core-sized neuron groups."""
    if engine == "memristor":
        per_core = min(m_inputs // sub.fan_in, n_neurons)
    else:
        slots_per_neuron = sub.fan_in + (1 if sub.has_bias else 0)
        per_core = pool // slots_per_neuron
    if per_core < 1:
        raise ValueError("banked fan-in exceeds a whole core")
    return _blocks(sub.neurons, per_core)


def pack_cores(stages, engine, digital_cfg=None, memristor_cfg=None):
    """Greedy first-fit placement of every sub-layer unit onto cores."""
    if engine == "digital":
        cfg = digital_cfg or DigitalCoreConfig()
        m, n = cfg.max_inputs, cfg.max_neurons
        pool = cfg.synapse_capacity
    elif engine == "memristor":
        cfg = memristor_cfg or MemristorCoreConfig()
        m, n = cfg.max_inputs, cfg.max_neurons
        pool = None
    else:
        raise ValueError(f"unknown engine: {engine}")

    cores = []

    def unit_shape(sub, neurons):
        if sub.kind == "banked":
            rows = sub.fan_in * neurons
            slots = (sub.fan_in + (1 if sub.has_bias else 0)) * neurons
        else:
            rows = sub.inputs
            slots = (sub.inputs + (1 if sub.has_bias else 0)) * neurons
        return rows, neurons, slots

    def fits(core, sub, rows, cols, slots, core_type):
        if core.core_type != core_type:
            return False
        if sub.stage in core.stages():
            return False
        if engine == "memristor":
            return (core.rows_used + rows <= m
                    and core.cols_used + cols <= n)
        return core.slots_used + slots <= pool

    def place(sub, neurons, offset):
        rows, cols, slots = unit_shape(sub, neurons)
        if engine == "memristor":
            core_type = "memristor_dac" if sub.stage == 0 else "memristor_plain"
        else:
            core_type = "digital"
        entry = replace(sub, neurons=neurons, offset=offset,
                        inputs=(sub.fan_in * neurons
                                if sub.kind == "banked" else sub.inputs))
        for core in cores:
            if fits(core, sub, rows, cols, slots, core_type):
                core.entries.append(entry)
                core.rows_used += rows
                core.cols_used += cols
                core.slots_used += slots
                return
        core = CorePlacement(core_id=len(cores), core_type=core_type)
        core.entries.append(entry)
        core.rows_used = rows
        core.cols_used = cols
        core.slots_used = slots
        cores.append(core)

    for stage in stages:
        for sub in stage:
            if sub.kind == "banked":
                units = _banked_units(sub, m, n, pool, engine)
            elif engine == "memristor":
                if sub.inputs > m:
                    raise ValueError("dense tile exceeds the core row budget")
                units = _blocks(sub.neurons, n)
            else:
                if sub.inputs + (1 if sub.has_bias else 0) > m:
                    raise ValueError("dense tile exceeds the input buffer")
                units = _blocks(sub.neurons, n)
            off = sub.offset
            for neurons in units:
                place(sub, neurons, off)
                off += neurons

    _check_allocation(cores, engine, m, n, pool)
    latencies = core_latencies(cores, engine, digital_cfg, memristor_cfg)
    n_stages = len(stages)
    stage_lat = []
    for s in range(n_stages):
        vals = [lat for core, lat in zip(cores, latencies)
                if s in core.stages()]
        stage_lat.append(max(vals) if vals else 0.0)
    return CoreAllocation(engine=engine, cores=cores,
                          stage_latencies=stage_lat,
                          max_core_latency=max(latencies))


def _check_allocation(cores, engine, m, n, pool):
    for core in cores:
        stages = [e.stage for e in core.entries]
        if len(stages) != len(set(stages)):
            raise AssertionError("same-stage sub-layers share a core")
        if engine == "memristor":
            if core.rows_used > m or core.cols_used > n:
                raise AssertionError("crossbar core over capacity")
            if core.core_type == "memristor_dac" and any(
                    e.stage != 0 for e in core.entries):
                raise AssertionError("DAC core hosts a non-input stage")
        else:
            if core.slots_used > pool:
                raise AssertionError("digital core over memory capacity")


def _entry_busy_cycles(entry, engine):
    if engine == "digital":
        if entry.kind == "banked":
            return (entry.fan_in + (1 if entry.has_bias else 0)) * entry.neurons
        return entry.inputs + (1 if entry.has_bias else 0)
    return None  # memristor handled per core


def _entry_route_cycles(entry, engine, mem_cfg):
    if engine == "digital":
        bits = DIGITAL_PARTIAL_BITS if entry.is_partial else DIGITAL_OUTPUT_BITS
        return math.ceil(entry.neurons * bits / 8) + 1
    return transfer_cycles(entry.neurons, mem_cfg.output_bits,
                           mem_cfg.link_bits) + 1


def core_latencies(cores, engine, digital_cfg=None, memristor_cfg=None):
    """Per-core per-pattern latency in seconds, output routing included.

    An entry whose consumer lives on the same core loops back through the
    adjacent switch and is not charged interconnect cycles.
    """
    dig = digital_cfg or DigitalCoreConfig()
    mem = memristor_cfg or MemristorCoreConfig()
    clock = dig.clock_hz if engine == "digital" else mem.clock_hz
    out = []
    for core in cores:
        keys = {e.key for e in core.entries}
        cycles = 0
        if engine == "memristor":
            cycles += mem.kappa_cycles
        for entry in core.entries:
            if engine == "digital":
                cycles += _entry_busy_cycles(entry, engine)
            else:
                cycles += mem.crossbar_cycles + transfer_cycles(
                    entry.neurons, mem.output_bits, mem.link_bits)
            if entry.consumer_key and entry.consumer_key in keys:
                cycles += 1  # loopback via the adjacent switch
            else:
                cycles += _entry_route_cycles(entry, engine, mem)
        out.append(cycles / clock)
    return out


def replicate_for_rate(alloc: CoreAllocation, required_rate):
    """Duplicate the instance until the slowest core meets the rate."""
    if required_rate <= 0:
        raise ValueError("required rate must be positive")
    repl = max(1, math.ceil(required_rate * alloc.max_core_latency - 1e-9))
    done = replace_allocation(alloc, replication=repl,
                              required_rate=required_rate)
    return done


def replace_allocation(alloc, **kw):
    new = CoreAllocation(engine=alloc.engine, cores=alloc.cores,
                         stage_latencies=alloc.stage_latencies,
                         max_core_latency=alloc.max_core_latency,
                         replication=alloc.replication,
                         required_rate=alloc.required_rate)
    for k, v in kw.items():
        setattr(new, k, v)
    new.rate_satisfied = (new.required_rate <= new.throughput + 1e-9
                          if new.required_rate else True)
    return new


def map_network_dims(layer_dims, engine, required_rate=None,
                     digital_cfg=None, memristor_cfg=None):
    """One-shot: split, pack and (optionally) replicate a network."""
    if engine == "memristor":
        cfg = memristor_cfg or MemristorCoreConfig()
        stages = split_network_dims(layer_dims, cfg.max_inputs,
                                    cfg.max_neurons, bias_needs_slot=False)
    else:
        cfg = digital_cfg or DigitalCoreConfig()
        stages = split_network_dims(layer_dims, cfg.max_inputs,
                                    cfg.max_neurons, bias_needs_slot=True)
    alloc = pack_cores(stages, engine, digital_cfg, memristor_cfg)
    if required_rate is not None:
        alloc = replicate_for_rate(alloc, required_rate)
    return alloc


def dims_of_network(net: NetworkSpec):
    return [("dense", layer.weights.shape[0], layer.weights.shape[1], True)
            for layer in net.layers]


def total_synapses(layer_dims):
    """Synapse count of a network description (bias excluded)."""
    return sum((a * b if kind == "dense" else a * b)
               for kind, a, b, _ in layer_dims)


def split_network(net: NetworkSpec, m_inputs, n_neurons, bias_needs_slot):
    """Rewrite a float network with explicit partial and combiner layers.

    Returns (rewritten NetworkSpec, per-layer 0/1 gradient masks).  Layers
    that fit a core pass through unchanged (mask None).  The rewritten
    network computes the same function: partial tiles are identity and the
    combiner adds them with unit weights before the original activation.
    """
    new_layers = []
    masks = []
    for layer in net.layers:
        n_in, n_out = layer.weights.shape
        slot_total = n_in + (1 if bias_needs_slot else 0)
        sizes = _blocks(slot_total, m_inputs)
        if len(sizes) == 1:
            new_layers.append(LayerSpec(layer.weights.copy(),
                                        layer.bias.copy(), layer.activation))
            masks.append(None)
            continue
        if bias_needs_slot:
            sizes = sizes.copy()
            sizes[0] -= 1
        n_blocks = len(sizes)
        part_w = np.zeros((n_in, n_blocks * n_out))
        part_mask = np.zeros_like(part_w)
        row = 0
        for b, size in enumerate(sizes):
            cols = slice(b * n_out, (b + 1) * n_out)
            part_w[row:row + size, cols] = layer.weights[row:row + size]
            part_mask[row:row + size, cols] = 1.0
            row += size
        part_bias = np.zeros(n_blocks * n_out)
        part_bias[:n_out] = layer.bias  # bias rides the first block
        new_layers.append(LayerSpec(part_w, part_bias, IDENTITY))
        masks.append(part_mask)
        comb_w = np.zeros((n_blocks * n_out, n_out))
        for b in range(n_blocks):
            comb_w[b * n_out:(b + 1) * n_out][np.arange(n_out),
                                              np.arange(n_out)] = 1.0
        comb_mask = (comb_w != 0).astype(np.float64)
        new_layers.append(LayerSpec(comb_w, np.zeros(n_out),
                                    layer.activation))
        masks.append(comb_mask)
    return NetworkSpec(new_layers), masks


def retrain_split(net: NetworkSpec, masks, inputs, targets, epochs=10,
                  lr=0.05, seed=0):
    """Fine-tune a rewritten network, keeping the split structure zeroed."""
    return train_sgd(net, inputs, targets, epochs=epochs, lr=lr, seed=seed,
                     masks=masks)


def rewritten_matches_original(net: NetworkSpec, split: NetworkSpec, x,
                               rtol=1e-12):
    a = forward(net, x)
    b = forward(split, x)
    return np.allclose(a, b, rtol=rtol, atol=0.0)
