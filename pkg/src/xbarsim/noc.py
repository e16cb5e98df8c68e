"""Statically scheduled 2D-mesh interconnect.

Neuron traffic is known at compile time, so the mesh runs a fixed
time-division schedule instead of dynamic routing: every flow gets a
contiguous block of slots on each link of its XY route, offset by one
slot per hop, and no two flows ever share a (link, slot) pair.  Traffic
between sub-layers on the same core takes the switch loopback path and
costs a single slot.  Network outputs leave through a private egress
link per core; their flits count toward latency but not link energy
(off-chip IO is billed separately).

The per-flit hop energy is a calibration constant, not a measured value;
energy queries fail loudly when it is unset rather than reporting zero.
"""

import json
import math
from dataclasses import dataclass, field

from .mapper import DIGITAL_OUTPUT_BITS, DIGITAL_PARTIAL_BITS, CoreAllocation
from .cores import MemristorCoreConfig

HOP_ENERGY_PJ_PER_FLIT = 0.98  # CALIBRATION: router+link energy per 8-bit flit-hop


@dataclass(frozen=True)
class MeshConfig:
    width: int
    height: int
    link_bits: int = 8
    clock_hz: float = 2e8
    hop_energy_pj_per_flit: float = HOP_ENERGY_PJ_PER_FLIT
    dac_placement: str = "edge"  # edge | uniform

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("mesh must be at least 1x1")
        if self.dac_placement not in ("edge", "uniform"):
            raise ValueError(f"unknown dac_placement {self.dac_placement!r}")

    @property
    def capacity(self):
        return self.width * self.height


def minimal_mesh(n_cores, **kw):
    """Smallest square mesh holding n_cores."""
    side = max(1, math.ceil(math.sqrt(n_cores)))
    return MeshConfig(width=side, height=side, **kw)


@dataclass(frozen=True)
class Flow:
    flow_id: int
    src_core: int
    dst_core: int  # -1 for egress (system output)
    kind: str  # mesh | loopback | egress
    flits: int
    route: tuple  # directed mesh links ((x,y),(x2,y2))
    hops: int  # latency hops (len(route), egress counts 1)
    start_slot: int
    slots: int  # occupied per hop (loopback pins this to 1)

    @property
    def finish_cycle(self):
        return self.start_slot + self.slots + self.hops


@dataclass
class SlotTable:
    flows: list = field(default_factory=list)
    links: dict = field(default_factory=dict)  # link -> [(slot, flow_id)]

    def to_json(self):
        flows = [{"id": f.flow_id, "src": f.src_core, "dst": f.dst_core,
                  "kind": f.kind, "flits": f.flits, "start": f.start_slot,
                  "slots": f.slots,
                  "route": [[list(a), list(b)] for a, b in f.route]}
                 for f in self.flows]
        links = {f"{a}->{b}": sorted(v) for (a, b), v in self.links.items()}
        return json.dumps({"flows": flows, "links": links}, sort_keys=True)


def place_cores(alloc: CoreAllocation, mesh: MeshConfig):
    """Row-major placement in pipeline-stage order; returns id -> (x, y).

    Row y=0 faces the sensor stack, so the stage ordering puts converter
    cores nearest the vertical IO.  dac_placement="uniform" spreads them
    evenly across the grid instead.
    """
    cores = sorted(alloc.cores, key=lambda c: (min(c.stages()), c.core_id))
    if len(cores) > mesh.capacity:
        raise ValueError(
            f"mesh {mesh.width}x{mesh.height} cannot hold {len(cores)} cores")
    order = [c.core_id for c in cores]
    if mesh.dac_placement == "uniform":
        dac = [c.core_id for c in cores if c.core_type == "memristor_dac"]
        rest = [c.core_id for c in cores if c.core_type != "memristor_dac"]
        if dac:
            slots = [k * len(cores) // len(dac) for k in range(len(dac))]
            order = [-1] * len(cores)
            for cid, s in zip(dac, slots):
                order[s] = cid
            it = iter(rest)
            order = [cid if cid != -1 else next(it) for cid in order]
    return {cid: (i % mesh.width, i // mesh.width)
            for i, cid in enumerate(order)}


def xy_route(src, dst):
    """Dimension-ordered route: X first, then Y; list of directed links."""
    x, y = src
    links = []
    while x != dst[0]:
        nx = x + (1 if dst[0] > x else -1)
        links.append(((x, y), (nx, y)))
        x = nx
    while y != dst[1]:
        ny = y + (1 if dst[1] > y else -1)
        links.append(((x, y), (x, ny)))
        y = ny
    return links


def _entry_out_bits(entry, engine, mem_cfg):
    if engine == "memristor":
        return mem_cfg.output_bits
    return DIGITAL_PARTIAL_BITS if entry.is_partial else DIGITAL_OUTPUT_BITS


def _overlap(a0, a1, b0, b1):
    return max(0, min(a1, b1) - max(a0, b0))


def _payload_values(producer, consumer):
    """How many of the producer unit's outputs this consumer unit reads."""
    p0, p1 = producer.offset, producer.offset + producer.neurons
    if consumer.kind == "dense":
        return _overlap(p0, p1, consumer.in_offset,
                        consumer.in_offset + consumer.inputs)
    return _overlap(p0, p1, consumer.offset,
                    consumer.offset + consumer.neurons)


def build_schedule(alloc: CoreAllocation, placement, mesh: MeshConfig,
                   memristor_cfg=None):
    """Greedy earliest-slot time-division schedule for all neuron flows.

    Flows are enumerated in deterministic order (producer core id, entry
    order, consumer core id) and each takes the earliest start slot whose
    route links are free for its whole flit train, one slot later per hop.
    """
    mem = memristor_cfg or MemristorCoreConfig()
    by_key = {}
    for core in alloc.cores:
        for entry in core.entries:
            by_key.setdefault(entry.key, []).append((core.core_id, entry))
    busy = {}  # link -> set of slots
    table = SlotTable()

    def earliest(route, flits):
        slot = 0
        while True:
            ok = all(s not in busy.get(link, ())
                     for h, link in enumerate(route)
                     for s in range(slot + h, slot + flits + h))
            if ok:
                return slot
            slot += 1

    def commit(flow):
        for h, link in enumerate(flow.route):
            taken = busy.setdefault(link, set())
            for s in range(flow.start_slot + h,
                           flow.start_slot + flow.slots + h):
                taken.add(s)
                table.links.setdefault(link, []).append((s, flow.flow_id))
        table.flows.append(flow)

    for core in sorted(alloc.cores, key=lambda c: c.core_id):
        for entry in core.entries:
            bits_per_value = _entry_out_bits(entry, alloc.engine, mem)
            if not entry.consumer_key:
                flits = math.ceil(entry.neurons * bits_per_value
                                  / mesh.link_bits)
                commit(Flow(flow_id=len(table.flows), src_core=core.core_id,
                            dst_core=-1, kind="egress", flits=flits,
                            route=(), hops=1, start_slot=0, slots=flits))
                continue
            for dst_id, consumer in sorted(
                    by_key.get(entry.consumer_key, []), key=lambda t: t[0]):
                values = _payload_values(entry, consumer)
                if values == 0:
                    continue
                flits = math.ceil(values * bits_per_value / mesh.link_bits)
                if dst_id == core.core_id:
                    commit(Flow(flow_id=len(table.flows),
                                src_core=core.core_id, dst_core=dst_id,
                                kind="loopback", flits=flits, route=(),
                                hops=0, start_slot=0, slots=1))
                    continue
                route = tuple(xy_route(placement[core.core_id],
                                       placement[dst_id]))
                start = earliest(route, flits)
                commit(Flow(flow_id=len(table.flows), src_core=core.core_id,
                            dst_core=dst_id, kind="mesh", flits=flits,
                            route=route, hops=len(route), start_slot=start,
                            slots=flits))
    return table


def routing_latency(table: SlotTable, clock_hz=2e8):
    """Seconds until the last flow's tail flit arrives."""
    if not table.flows:
        return 0.0
    return max(f.finish_cycle for f in table.flows) / clock_hz


def routing_energy(table: SlotTable, patterns, mesh: MeshConfig):
    """Joules spent moving flits across mesh links for `patterns` runs."""
    if mesh.hop_energy_pj_per_flit is None:
        raise ValueError("hop energy is unconfigured; set "
                         "hop_energy_pj_per_flit (pJ per flit-hop)")
    flit_hops = sum(f.flits * len(f.route) for f in table.flows)
    return flit_hops * mesh.hop_energy_pj_per_flit * 1e-12 * patterns


def schedule_network(alloc: CoreAllocation, mesh=None, memristor_cfg=None):
    """Place and schedule in one step; returns (placement, table, mesh)."""
    if mesh is None:
        mesh = minimal_mesh(alloc.instance_cores)
    placement = place_cores(alloc, mesh)
    table = build_schedule(alloc, placement, mesh, memristor_cfg)
    return placement, table, mesh
