"""Behavioral model of the threshold-gated bipolar memristor.

Static I-V is a sinh conduction law; the internal state x in [0, 1] moves
only when the applied voltage exceeds the write threshold, with an
exponential-decay window slowing the approach to either rail.  Defaults
reproduce the published fit: 125 kOhm minimum resistance, a 1000x
resistance ratio, and a full 0.001 -> 0.99 transition in about 80 ns under
a constant 4.25 V drive.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels

# Largest Euler substep that keeps the stiff exponential drive accurate.
DT_MAX = 1e-9


@dataclass(frozen=True)
class DeviceParams:
    v_p: float = 4.0          # positive write threshold, V
    v_n: float = 4.0          # negative write threshold magnitude, V
    a_p: float = 816000.0     # positive drive prefactor, 1/s
    a_n: float = 816000.0     # negative drive prefactor, 1/s
    x_p: float = 0.9897       # window onset approaching x = 1
    x_n: float = 0.9897       # window onset approaching x = 0 (mirrored)
    alpha_p: float = 0.2
    alpha_n: float = 0.2
    a1: float = 1.6e-4        # sinh conduction prefactor, positive branch, A
    a2: float = 1.6e-4        # negative branch, A
    b: float = 0.05           # sinh argument scale, 1/V
    x0: float = 0.001         # as-fabricated state
    g_ratio: float = 1000.0   # max/min conductance ratio enforced by clamping
    rate_scale: float = 1.0   # single global calibration knob; 1.0 passes

    @property
    def g_max(self) -> float:
        return self.a1 * self.b

    @property
    def g_min(self) -> float:
        return self.g_max / self.g_ratio

    @property
    def r_min(self) -> float:
        return 1.0 / self.g_max

    @property
    def r_max(self) -> float:
        return 1.0 / self.g_min


def device_current(params: DeviceParams, x: float, v: float) -> float:
    """Static current through the device at state x and voltage v."""
    a = params.a1 if v >= 0.0 else params.a2
    return a * x * np.sinh(params.b * v)


def small_signal_conductance(params, x):
    """Effective conductance a1*b*x clamped to [g_min, g_max].

    Accepts scalars or arrays.
    """
    g = params.a1 * params.b * np.asarray(x, dtype=np.float64)
    return np.clip(g, params.g_min, params.g_max)


def state_for_conductance(params: DeviceParams, g: float) -> float:
    """Inverse of small_signal_conductance on the unclamped branch."""
    if not (params.g_min <= g <= params.g_max):
        raise ValueError(f"conductance {g!r} outside [{params.g_min}, {params.g_max}]")
    return g / (params.a1 * params.b)


def step_state(params: DeviceParams, x: float, v: float, duration: float,
               dt: float = DT_MAX) -> float:
    """Advance the state under a constant drive for the given duration.

    Integration is explicit Euler with substeps no longer than dt
    (dt itself capped at DT_MAX); the state stays clamped to [0, 1].
    """
    if duration < 0.0:
        raise ValueError("duration must be non-negative")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"state {x!r} outside [0, 1]")
    dt = min(dt, DT_MAX)
    return _kernels.integrate_state(
        x, v, duration, dt,
        params.v_p, params.v_n, params.a_p, params.a_n,
        params.x_p, params.x_n, params.alpha_p, params.alpha_n,
        params.rate_scale)


def switching_time(params: DeviceParams, v: float, x_from: float, x_to: float,
                   dt: float = DT_MAX, t_limit: float = 1e-6) -> float:
    """Time for the state to cross x_to under constant drive v.

    Walks the Euler integration in dt steps and returns the first crossing
    time; raises if t_limit passes without a crossing.
    """
    rising = x_to > x_from
    x = x_from
    t = 0.0
    while t < t_limit:
        x = step_state(params, x, v, dt, dt)
        t += dt
        if (rising and x >= x_to) or (not rising and x <= x_to):
            return t
    raise RuntimeError(f"no crossing of {x_to} within {t_limit} s at {v} V")


def with_rate_scale(params: DeviceParams, rate_scale: float) -> DeviceParams:
    return replace(params, rate_scale=rate_scale)
