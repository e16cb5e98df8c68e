"""Closed-loop conductance programming through the 1T1M access structure.

One device per core is selected at a time; its column drains through a
sense resistor and the shared 8-bit ADC digitizes the divider voltage, so
the verify step only ever sees a quantized conductance estimate.  Write
pulses alternate polarity as the estimate brackets the target, halving the
pulse width on each reversal down to a floor.  Cycle-to-cycle disturbance
is a multiplicative lognormal factor on each pulse's state change.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .device import DT_MAX, DeviceParams, small_signal_conductance

FRESH_STATE = 0.001  # as-fabricated device state


@dataclass(frozen=True)
class ProgrammingConfig:
    v_write: float = 4.25
    pulse_width: float = 1e-9
    width_floor: float = 0.1e-9
    max_pulses: int = 200
    v_read: float = 0.5
    r_sense: float = 1e5
    adc_bits: int = 8
    sigma: float = 0.05  # lognormal cycle-to-cycle spread of each state step
    tolerance_div: int = 128  # target window = conductance span / this

    @property
    def adc_levels(self):
        return (1 << self.adc_bits) - 1

    def tolerance(self, params: DeviceParams):
        return (params.g_max - params.g_min) / self.tolerance_div


@dataclass
class ProgrammingReport:
    """Outcome of programming a batch of devices (shapes match the targets)."""

    state: np.ndarray
    g_read: np.ndarray  # conductance as the shared ADC last saw it
    g_actual: np.ndarray  # true small-signal conductance of the final state
    pulses: np.ndarray
    converged: np.ndarray

    @property
    def total_pulses(self):
        return int(self.pulses.sum())

    @property
    def mean_pulses(self):
        return float(self.pulses.mean())

    @property
    def fraction_converged(self):
        return float(self.converged.mean())


def read_device(params: DeviceParams, x, config: ProgrammingConfig = None):
    """One verify read: (quantized conductance estimate, raw ADC code)."""
    cfg = config or ProgrammingConfig()
    return _kernels.read_conductance(
        float(x), params.a1, params.b, params.g_min, params.g_max,
        cfg.v_read, cfg.r_sense, cfg.adc_levels)


def _pulse_mults(cfg, n, seed, no_variation):
    if no_variation or cfg.sigma == 0.0:
        return np.ones((n, cfg.max_pulses))
    rng = np.random.default_rng(seed)
    return rng.lognormal(0.0, cfg.sigma, size=(n, cfg.max_pulses))


def program_targets(params: DeviceParams, g_targets,
                    config: ProgrammingConfig = None, seed=0,
                    no_variation=False, x0=FRESH_STATE):
    """Program every device of an array to its target conductance, serially.

    Targets must lie in [0, G_max].  The disturbance sequence is drawn up
    front from the seed, so results are identical on both kernel backends.
    """
    cfg = config or ProgrammingConfig()
    targets = np.asarray(g_targets, dtype=np.float64)
    if targets.size == 0:
        raise ValueError("no targets to program")
    if float(targets.min()) < 0.0 or float(targets.max()) > params.g_max + 1e-18:
        raise ValueError("targets must lie within [0, G_max]")
    flat = targets.reshape(-1)
    mults = _pulse_mults(cfg, flat.shape[0], seed, no_variation)
    x0s = np.full(flat.shape[0], float(x0))
    xs, counts, oks = _kernels.program_array(
        x0s, flat, cfg.tolerance(params), mults,
        cfg.v_write, cfg.pulse_width, cfg.width_floor, cfg.max_pulses, DT_MAX,
        params.a1, params.b, params.g_min, params.g_max,
        cfg.v_read, cfg.r_sense, cfg.adc_levels,
        params.v_p, params.v_n, params.a_p, params.a_n,
        params.x_p, params.x_n, params.alpha_p, params.alpha_n,
        params.rate_scale)
    g_read = np.empty_like(xs)
    for i in range(xs.shape[0]):
        g_read[i], _ = _kernels.read_conductance(
            xs[i], params.a1, params.b, params.g_min, params.g_max,
            cfg.v_read, cfg.r_sense, cfg.adc_levels)
    shape = targets.shape
    return ProgrammingReport(
        state=xs.reshape(shape),
        g_read=g_read.reshape(shape),
        g_actual=small_signal_conductance(params, xs).reshape(shape),
        pulses=counts.reshape(shape),
        converged=oks.reshape(shape))


def program_pairs(params: DeviceParams, g_plus, g_minus,
                  config: ProgrammingConfig = None, seed=0,
                  no_variation=False):
    """Program a differential pair array; returns the two achieved arrays."""
    g_plus = np.asarray(g_plus, dtype=np.float64)
    g_minus = np.asarray(g_minus, dtype=np.float64)
    if g_plus.shape != g_minus.shape:
        raise ValueError("pair arrays must have the same shape")
    stacked = np.stack([g_plus, g_minus])
    report = program_targets(params, stacked, config, seed, no_variation)
    return report.g_actual[0], report.g_actual[1], report
