"""Core-level behavior, timing and reference costs for the three engines.

Three building blocks: an SRAM digital neural core (serial input broadcast
into parallel accumulators), a memristor crossbar core (optionally fronted
by DACs for sensor bytes), and an analytic RISC baseline calibrated from a
single published reference point.  Published area/power/time rows for all
three are embedded as reference data.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .crossbar import crossbar_layer_forward, dac_convert, threshold_readout
from .device import DeviceParams
from .nnmodel import QuantizedLayer, quantized_layer_apply

CLOCK_HZ = 2e8

# Fixed control overhead of a memristor core pass, in cycles.  Calibrated
# once so a full 64-output core lands on the published 9e-8 s: 18 cycles
# total = 2 crossbar + 8 transfer (64 single-bit outputs over an 8-bit
# link) + KAPPA_CYCLES.
KAPPA_CYCLES = 8

# RISC baseline: published per-pattern time for a 1-neuron, 784-synapse
# workload, folded into one per-synapse constant.
RISC_REFERENCE_TIME = 3.97e-5
RISC_REFERENCE_SYNAPSES = 784
RISC_TIME_PER_SYNAPSE = RISC_REFERENCE_TIME / RISC_REFERENCE_SYNAPSES


@dataclass(frozen=True)
class DigitalCoreConfig:
    max_inputs: int = 256
    max_neurons: int = 128
    weight_bits: int = 8
    io_bits: int = 8
    accumulator_bits: int = 24
    clock_hz: float = CLOCK_HZ

    @property
    def synapse_capacity(self):
        return self.max_inputs * self.max_neurons


@dataclass(frozen=True)
class MemristorCoreConfig:
    max_inputs: int = 128
    max_neurons: int = 64
    has_dac: bool = False
    crossbar_cycles: int = 2
    kappa_cycles: int = KAPPA_CYCLES
    link_bits: int = 8
    output_bits: int = 1  # threshold outputs are single-bit on the NoC
    clock_hz: float = CLOCK_HZ
    device: DeviceParams = field(default_factory=DeviceParams)


@dataclass(frozen=True)
class CoreCost:
    area_mm2: float
    total_power_mw: float
    leakage_power_mw: float
    processing_time_s: float

    def __post_init__(self):
        if not (0 < self.leakage_power_mw <= self.total_power_mw):
            raise ValueError("leakage must be positive and at most total power")
        if self.area_mm2 <= 0 or self.processing_time_s <= 0:
            raise ValueError("area and processing time must be positive")

    @property
    def dynamic_power_mw(self):
        return self.total_power_mw - self.leakage_power_mw


# Published reference rows (area mm^2, total mW, leakage mW, time s).
REFERENCE_COSTS = {
    "risc": CoreCost(0.524, 87.0, 54.0, RISC_REFERENCE_TIME),
    "digital": CoreCost(0.208, 24.2, 6.94, 1.28e-6),
    "memristor": CoreCost(0.0082, 0.0888, 0.0118, 9e-8),
}


def digital_core_forward(cfg: DigitalCoreConfig, layer: QuantizedLayer, inputs):
    """Serial-broadcast execution of one quantized layer on the SRAM core.

    Bit-exact against the quantized reference path by construction; the
    core only adds capacity checks.
    """
    rows, cols = layer.qweights.shape
    if rows + 1 > cfg.max_inputs:  # +1: the stacked bias row
        raise ValueError("layer inputs exceed core capacity")
    if cols > cfg.max_neurons:
        raise ValueError("layer neurons exceed core capacity")
    return quantized_layer_apply(layer, inputs)


def digital_core_latency(cfg: DigitalCoreConfig, inputs_used):
    """One input broadcast per cycle; readout overlaps output routing."""
    if not 1 <= inputs_used <= cfg.max_inputs:
        raise ValueError("inputs_used outside [1, max_inputs]")
    return inputs_used / cfg.clock_hz


def transfer_cycles(outputs_used, output_bits=1, link_bits=8):
    """Cycles to push outputs_used values down the inter-core link."""
    if outputs_used <= 0:
        raise ValueError("need at least one output")
    return math.ceil(outputs_used * output_bits / link_bits)


def memristor_core_forward(cfg: MemristorCoreConfig, weights, bias, inputs,
                           wire_r=0.0):
    """Evaluate one layer on the crossbar core.

    A DAC-fronted core takes 8-bit sensor codes; a plain core takes the
    upstream threshold outputs, which drive the rows at +-1 V directly.
    """
    x = np.asarray(inputs)
    if cfg.has_dac:
        v = dac_convert(x)
    else:
        if not np.all(np.isin(x, (-1.0, 1.0))):
            raise ValueError("plain memristor cores take +-1 inputs")
        v = x.astype(np.float64)
    return crossbar_layer_forward(weights, bias, v, params=cfg.device,
                                  wire_r=wire_r)


def memristor_core_latency(cfg: MemristorCoreConfig, outputs_used):
    """Crossbar settle + output transfer + fixed control overhead."""
    if not 1 <= outputs_used <= cfg.max_neurons:
        raise ValueError("outputs_used outside [1, max_neurons]")
    cycles = (cfg.crossbar_cycles
              + transfer_cycles(outputs_used, cfg.output_bits, cfg.link_bits)
              + cfg.kappa_cycles)
    return cycles / cfg.clock_hz


def memristor_core_ii_cycles(cfg: MemristorCoreConfig, outputs_used):
    """Steady-state initiation interval: compute overlaps transfer, so the
    slower of the two gates the pipeline, not their sum."""
    return max(cfg.crossbar_cycles,
               transfer_cycles(outputs_used, cfg.output_bits, cfg.link_bits))


def risc_time_per_pattern(total_synapses):
    """Analytic RISC baseline: time scales with synapse count."""
    if total_synapses < 0:
        raise ValueError("synapse count cannot be negative")
    return total_synapses * RISC_TIME_PER_SYNAPSE


def risc_time_for_ops(ops, time_per_op):
    """Non-NN workloads: per-op time is an external calibration constant."""
    if ops < 0 or time_per_op <= 0:
        raise ValueError("need non-negative ops and positive per-op time")
    return ops * time_per_op
