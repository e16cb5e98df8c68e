"""Hot numeric loops with a numba backend and a pure-Python fallback.

Every kernel is written once as a plain Python function and compiled with
numba when available.  Set XBARSIM_NUMBA=0 to force the interpreted path;
both paths execute the same function objects, so results agree.
"""

import math
import os

import numpy as np

_want_numba = os.environ.get("XBARSIM_NUMBA", "1") != "0"
HAS_NUMBA = False
if _want_numba:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def _compile(fn):
    if HAS_NUMBA:
        return njit(cache=True)(fn)
    return fn


def _state_rate(x, v, v_p, v_n, a_p, a_n, x_p, x_n, alpha_p, alpha_n, rate_scale):
    # dx/dt = g(V) * f(x); g is threshold-gated, f windows the approached rail.
    if v > v_p:
        g = a_p * (math.exp(v) - math.exp(v_p))
        if x > x_p:
            f = math.exp(-alpha_p * (x - x_p)) * (1.0 - (x - x_p) / (1.0 - x_p))
            if f < 0.0:
                f = 0.0
        else:
            f = 1.0
        return g * f * rate_scale
    if v < -v_n:
        g = -a_n * (math.exp(-v) - math.exp(v_n))
        onset = 1.0 - x_n
        if x < onset:
            if onset > 0.0:
                f = math.exp(-alpha_n * (onset - x)) * (x / onset)
            else:
                f = 0.0
            if f < 0.0:
                f = 0.0
        else:
            f = 1.0
        return g * f * rate_scale
    return 0.0


def _integrate_state(x, v, duration, dt_max,
                     v_p, v_n, a_p, a_n, x_p, x_n, alpha_p, alpha_n, rate_scale):
    # Explicit Euler at fixed substep <= dt_max; state clamped to [0, 1].
    if duration <= 0.0:
        return x
    n = int(math.ceil(duration / dt_max - 1e-12))
    if n < 1:
        n = 1
    dt = duration / n
    for _ in range(n):
        r = _state_rate(x, v, v_p, v_n, a_p, a_n, x_p, x_n,
                        alpha_p, alpha_n, rate_scale)
        x = x + r * dt
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
    return x


def _read_conductance(x, a1, b, g_min, g_max, v_read, r_sense, adc_levels):
    # Voltage divider against the sense resistor, quantized by the shared ADC.
    g = a1 * b * x
    if g < g_min:
        g = g_min
    elif g > g_max:
        g = g_max
    v_col = v_read * r_sense / (r_sense + 1.0 / g)
    code = int(round(v_col / v_read * adc_levels))
    if code < 0:
        code = 0
    elif code > adc_levels:
        code = adc_levels
    if code == 0:
        return 0.0, 0
    v_hat = code / adc_levels * v_read
    r_hat = r_sense * (v_read - v_hat) / v_hat
    return 1.0 / r_hat, code


def _program_device(x0, g_target, tol_g, mults,
                    v_write, width0, width_floor, max_pulses, dt_max,
                    a1, b, g_min, g_max, v_read, r_sense, adc_levels,
                    v_p, v_n, a_p, a_n, x_p, x_n, alpha_p, alpha_n, rate_scale):
    """Feedback program-and-verify loop for one device.

    mults holds the per-pulse lognormal disturbance factors (length >= max_pulses).
    Returns (x_final, pulses_used, converged).
    """
    x = x0
    width = width0
    prev_pol = 0
    pulses = 0
    while pulses < max_pulses:
        g_hat, _ = _read_conductance(x, a1, b, g_min, g_max,
                                     v_read, r_sense, adc_levels)
        err = g_hat - g_target
        if abs(err) <= tol_g:
            return x, pulses, True
        pol = 1 if err < 0.0 else -1
        if prev_pol != 0 and pol != prev_pol:
            width = width * 0.5
            if width < width_floor:
                width = width_floor
        v = v_write if pol > 0 else -v_write
        x_next = _integrate_state(x, v, width, dt_max,
                                  v_p, v_n, a_p, a_n, x_p, x_n,
                                  alpha_p, alpha_n, rate_scale)
        dx = (x_next - x) * mults[pulses]
        x = x + dx
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
        prev_pol = pol
        pulses += 1
    g_hat, _ = _read_conductance(x, a1, b, g_min, g_max,
                                 v_read, r_sense, adc_levels)
    return x, pulses, abs(g_hat - g_target) <= tol_g


def _program_array(x0s, g_targets, tol_g, mults,
                   v_write, width0, width_floor, max_pulses, dt_max,
                   a1, b, g_min, g_max, v_read, r_sense, adc_levels,
                   v_p, v_n, a_p, a_n, x_p, x_n, alpha_p, alpha_n, rate_scale):
    """Serial program-and-verify over a flat device array (one shared ADC).

    mults is (n_devices, max_pulses).  Returns state, pulse-count and
    convergence arrays.
    """
    n = x0s.shape[0]
    xs = np.empty(n, dtype=np.float64)
    counts = np.empty(n, dtype=np.int64)
    oks = np.empty(n, dtype=np.bool_)
    for i in range(n):
        x, c, ok = _program_device(
            x0s[i], g_targets[i], tol_g, mults[i],
            v_write, width0, width_floor, max_pulses, dt_max,
            a1, b, g_min, g_max, v_read, r_sense, adc_levels,
            v_p, v_n, a_p, a_n, x_p, x_n, alpha_p, alpha_n, rate_scale)
        xs[i] = x
        counts[i] = c
        oks[i] = ok
    return xs, counts, oks


# Rebind in dependency order so the jitted callers resolve jitted callees.
_state_rate = _compile(_state_rate)
_integrate_state = _compile(_integrate_state)
_read_conductance = _compile(_read_conductance)
_program_device = _compile(_program_device)
_program_array = _compile(_program_array)

state_rate = _state_rate
integrate_state = _integrate_state
read_conductance = _read_conductance
program_device = _program_device
program_array = _program_array
