"""System-level area, power, throughput and efficiency reporting.

Power uses a duty-cycle model: each core pays its leakage always and
its dynamic share scaled by the fraction of time it is busy at the
required pattern rate.  That fraction comes from the core's own
per-pattern time and the rate one replica actually sees.  Reports can
also be built around a given published core count; the count is then
read as round(count / instance) replica groups of the reference core
running at the reference per-pattern time.

The design-space sweep rescales the reference core costs with a
two-parameter analytic model (a fixed periphery share plus a part
proportional to the synapse cell count), anchored so the reference
size reproduces the reference costs exactly.  The scaling fractions
are calibration constants, not measurements.
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

from .apps import AppSpec, risc_core_count
from .cores import (
    REFERENCE_COSTS,
    CoreCost,
    DigitalCoreConfig,
    MemristorCoreConfig,
)
from .mapper import core_latencies, map_network_dims
from .noc import minimal_mesh, routing_energy, schedule_network

TSV_ENERGY_PJ_PER_BIT = 0.05

# CALIBRATION: fixed (size-independent) share of core area and power in
# the sweep's analytic scaling model
SWEEP_FIXED_AREA_FRACTION = 0.2
SWEEP_FIXED_POWER_FRACTION = 0.2

MEMRISTOR_SWEEP_SIZES = ((32, 16), (64, 32), (128, 64), (256, 128),
                         (512, 256))
DIGITAL_SWEEP_SIZES = ((64, 32), (128, 64), (256, 128), (512, 256),
                       (1024, 512))

ARCH_CORE_TYPE = {"risc": "risc", "digital": "digital", "itim": "memristor"}


class UnderProvisionedWarning(UserWarning):
    """A core hit duty 1.0; replication should have prevented this."""


@dataclass
class PowerBreakdown:
    leakage_mw: float
    dynamic_mw: float
    routing_mw: float = 0.0
    tsv_mw: float = 0.0

    @property
    def total_mw(self):
        return (self.leakage_mw + self.dynamic_mw + self.routing_mw
                + self.tsv_mw)


@dataclass
class CostReport:
    app: str
    arch: str
    cores: int
    area_mm2: float
    power_mw: float
    efficiency_vs_risc: float
    breakdown: PowerBreakdown = None
    duties: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)


def system_area(core_count, core_type):
    """Die area in mm^2: count times the reference per-core area."""
    if core_count < 0:
        raise ValueError("core count must be >= 0")
    if core_type not in REFERENCE_COSTS:
        raise ValueError(f"unknown core type {core_type!r}")
    return core_count * REFERENCE_COSTS[core_type].area_mm2


def _duty(rate_per_replica, busy_time):
    duty = rate_per_replica * busy_time
    if duty > 1.0:
        warnings.warn(
            f"core duty clamped from {duty:.3f}; the instance is "
            "under-provisioned for the rate", UnderProvisionedWarning)
        return 1.0
    return duty


def core_power_mapped(alloc, rate, cost: CoreCost,
                      nonvolatile_idle_off=False):
    """Σ leakage + duty-scaled dynamic power over all replicas, in mW.

    Each replica sees rate/replication patterns; a core's busy time is
    its per-pattern latency from the allocation.  nonvolatile_idle_off
    drops the leakage of idle crossbar time (non-volatile synapses hold
    state unpowered); by default leakage is always paid.
    """
    if rate < 0:
        raise ValueError("rate must be >= 0")
    per_replica = rate / alloc.replication
    latencies = _alloc_latencies(alloc)
    leak = dyn = 0.0
    duties = []
    for lat in latencies:
        duty = _duty(per_replica, lat)
        duties.append(duty)
        leak_share = cost.leakage_power_mw * (duty if nonvolatile_idle_off else 1.0)
        leak += leak_share
        dyn += cost.dynamic_power_mw * duty
    return leak * alloc.replication, dyn * alloc.replication, duties


def _alloc_latencies(alloc):
    mem = MemristorCoreConfig() if alloc.engine == "memristor" else None
    dig = DigitalCoreConfig() if alloc.engine == "digital" else None
    return core_latencies(alloc.cores, alloc.engine, dig, mem)


def core_power_published(count, instance_size, rate, cost: CoreCost,
                         reference_time, nonvolatile_idle_off=False):
    """Duty-cycle power for a published core count, in mW.

    The count is interpreted as replica groups of reference cores:
    replicas = round(count / instance), each seeing rate/replicas and
    busy for the reference per-pattern time.
    """
    if count <= 0:
        raise ValueError("published count must be positive")
    replicas = max(1, round(count / max(1, instance_size)))
    duty = _duty(rate / replicas, reference_time)
    leak = cost.leakage_power_mw * (duty if nonvolatile_idle_off else 1.0)
    return count * (leak + cost.dynamic_power_mw * duty), duty


def risc_power_mw(core_count):
    """Always-on baseline: count times total core power."""
    return core_count * REFERENCE_COSTS["risc"].total_power_mw


def tsv_io_power_mw(bits_per_pattern, rate):
    """Vertical sensor IO cost at the configured pJ/bit."""
    if bits_per_pattern < 0 or rate < 0:
        raise ValueError("bits and rate must be >= 0")
    return bits_per_pattern * rate * TSV_ENERGY_PJ_PER_BIT * 1e-12 * 1e3


def efficiency_vs_risc(risc_mw, arch_mw):
    if arch_mw <= 0:
        raise ValueError("architecture power must be positive")
    return risc_mw / arch_mw


def within_orders_of_magnitude(ratio, low=3, high=5):
    """True when 10^low <= ratio < 10^(high+1): 'low to high orders'."""
    return 10.0 ** low <= ratio < 10.0 ** (high + 1)


def evaluate_app(app: AppSpec, arch, use_published_count=False,
                 nonvolatile_idle_off=False, include_interconnect=True,
                 digital_cfg=None, memristor_cfg=None):
    """Full cost report for one workload on one architecture."""
    from .apps import PUBLISHED_RESULTS
    if arch == "risc":
        count = (PUBLISHED_RESULTS[app.name]["risc"][0]
                 if use_published_count else risc_core_count(app))
        power = risc_power_mw(count)
        return CostReport(
            app=app.name, arch=arch, cores=count,
            area_mm2=system_area(count, "risc"), power_mw=power,
            efficiency_vs_risc=1.0,
            breakdown=PowerBreakdown(leakage_mw=count
                                     * REFERENCE_COSTS["risc"].leakage_power_mw,
                                     dynamic_mw=power - count
                                     * REFERENCE_COSTS["risc"].leakage_power_mw),
            constants={"risc_time_per_pattern":
                       app.risc_time_per_pattern()})
    core_type = ARCH_CORE_TYPE[arch]
    engine = "memristor" if arch == "itim" else "digital"
    cost = REFERENCE_COSTS[core_type]
    alloc = map_network_dims(app.pipeline(engine), engine,
                             required_rate=app.rate,
                             digital_cfg=digital_cfg,
                             memristor_cfg=memristor_cfg)
    duties = []
    if use_published_count:
        count = PUBLISHED_RESULTS[app.name][arch][0]
        core_mw, duty = core_power_published(
            count, alloc.instance_cores, app.rate, cost, cost.processing_time_s,
            nonvolatile_idle_off)
        leak_mw = count * cost.leakage_power_mw * (duty if nonvolatile_idle_off
                                          else 1.0)
        dyn_mw = core_mw - leak_mw
        duties = [duty]
    else:
        count = alloc.total_cores
        leak_mw, dyn_mw, duties = core_power_mapped(
            alloc, app.rate, cost, nonvolatile_idle_off)
    routing_mw = tsv_mw = 0.0
    if include_interconnect:
        _, table, mesh = schedule_network(alloc)
        routing_mw = routing_energy(table, app.rate, mesh) * 1e3
        tsv_mw = tsv_io_power_mw(app.input_bits, app.rate)
    breakdown = PowerBreakdown(leakage_mw=leak_mw, dynamic_mw=dyn_mw,
                               routing_mw=routing_mw, tsv_mw=tsv_mw)
    risc_mw = risc_power_mw(
        PUBLISHED_RESULTS[app.name]["risc"][0] if use_published_count
        else risc_core_count(app))
    return CostReport(
        app=app.name, arch=arch, cores=count,
        area_mm2=system_area(count, core_type),
        power_mw=breakdown.total_mw,
        efficiency_vs_risc=efficiency_vs_risc(risc_mw,
                                              breakdown.total_mw),
        breakdown=breakdown, duties=duties,
        constants={"hop_energy_pj_per_flit":
                   minimal_mesh(1).hop_energy_pj_per_flit,
                   "tsv_pj_per_bit": TSV_ENERGY_PJ_PER_BIT,
                   "reference_time_s": cost.processing_time_s})


def scaled_cost(cost: CoreCost, rows, cols, ref_rows, ref_cols,
                fixed_area=SWEEP_FIXED_AREA_FRACTION,
                fixed_power=SWEEP_FIXED_POWER_FRACTION):
    """Two-parameter rescaling of a reference core to another size."""
    cells = (rows * cols) / (ref_rows * ref_cols)
    a = fixed_area + (1.0 - fixed_area) * cells
    p = fixed_power + (1.0 - fixed_power) * cells
    return CoreCost(area_mm2=cost.area_mm2 * a,
                    total_power_mw=cost.total_power_mw * p,
                    leakage_power_mw=cost.leakage_power_mw * p,
                    processing_time_s=cost.processing_time_s)


def design_space_sweep(apps, arch, sizes=None,
                       fixed_area=SWEEP_FIXED_AREA_FRACTION,
                       fixed_power=SWEEP_FIXED_POWER_FRACTION):
    """Map every app at every core size; returns normalized result rows.

    Rows are dicts ordered (app, rows, cols) with absolute and per-app
    min-normalized area and power.  Rates follow the sweep frame size.
    """
    if arch not in ("digital", "itim"):
        raise ValueError("sweep covers the neural architectures only")
    engine = "memristor" if arch == "itim" else "digital"
    core_type = ARCH_CORE_TYPE[arch]
    ref = REFERENCE_COSTS[core_type]
    if sizes is None:
        sizes = (MEMRISTOR_SWEEP_SIZES if engine == "memristor"
                 else DIGITAL_SWEEP_SIZES)
    ref_rows = (MemristorCoreConfig().max_inputs if engine == "memristor"
                else DigitalCoreConfig().max_inputs)
    ref_cols = (MemristorCoreConfig().max_neurons if engine == "memristor"
                else DigitalCoreConfig().max_neurons)
    rows = []
    for app in apps:
        cells = []
        for m, n in sizes:
            if engine == "memristor":
                alloc = map_network_dims(
                    app.pipeline(engine), engine,
                    required_rate=app.sweep_rate,
                    memristor_cfg=MemristorCoreConfig(max_inputs=m,
                                                      max_neurons=n))
            else:
                alloc = map_network_dims(
                    app.pipeline(engine), engine,
                    required_rate=app.sweep_rate,
                    digital_cfg=DigitalCoreConfig(max_inputs=m,
                                                  max_neurons=n))
            cost = scaled_cost(ref, m, n, ref_rows, ref_cols,
                               fixed_area, fixed_power)
            area = alloc.total_cores * cost.area_mm2
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UnderProvisionedWarning)
                leak, dyn, _ = core_power_mapped(alloc, app.sweep_rate,
                                                 cost)
            cells.append({"app": app.name, "rows": m, "cols": n,
                          "cores": alloc.total_cores, "area_mm2": area,
                          "power_mw": leak + dyn})
        min_area = min(c["area_mm2"] for c in cells)
        min_power = min(c["power_mw"] for c in cells)
        for c in cells:
            c["norm_area"] = c["area_mm2"] / min_area
            c["norm_power"] = c["power_mw"] / min_power
            rows.append(c)
    return rows


SWEEP_COLUMNS = ("app", "rows", "cols", "cores", "area_mm2", "power_mw",
                 "norm_area", "norm_power")


def sweep_to_csv(rows):
    """Deterministic CSV text, one row per (app, size)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([r["app"], r["rows"], r["cols"], r["cores"],
                         f"{r['area_mm2']:.6f}", f"{r['power_mw']:.6f}",
                         f"{r['norm_area']:.6f}", f"{r['norm_power']:.6f}"])
    return buf.getvalue()
