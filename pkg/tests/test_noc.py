"""Mesh placement, slot scheduling, routing latency and link energy."""

import json

import pytest

from xbarsim.mapper import (
    CoreAllocation,
    CorePlacement,
    SubLayer,
    map_network_dims,
)
from xbarsim.cores import MemristorCoreConfig
from xbarsim.noc import (
    Flow,
    MeshConfig,
    SlotTable,
    build_schedule,
    minimal_mesh,
    place_cores,
    routing_energy,
    routing_latency,
    schedule_network,
    xy_route,
)

DEEP = [("dense", 784, 200, True), ("dense", 200, 100, True),
        ("dense", 100, 10, True)]


def _alloc(engine, cores):
    return CoreAllocation(engine=engine, cores=cores, stage_latencies=[0.0],
                          max_core_latency=1e-6)


def _core(core_id, core_type, entries):
    c = CorePlacement(core_id=core_id, core_type=core_type)
    c.entries = entries
    return c


def test_minimal_mesh_is_smallest_square():
    assert (minimal_mesh(1).width, minimal_mesh(1).height) == (1, 1)
    assert (minimal_mesh(2).width, minimal_mesh(2).height) == (2, 2)
    assert (minimal_mesh(46).width, minimal_mesh(46).height) == (7, 7)
    with pytest.raises(ValueError):
        MeshConfig(0, 3)


def test_single_core_placement():
    alloc = _alloc("digital", [_core(0, "digital", [
        SubLayer(stage=0, kind="dense", inputs=4, neurons=2, has_bias=False,
                 key="L0")])])
    assert place_cores(alloc, minimal_mesh(1)) == {0: (0, 0)}


def test_row_major_stage_order():
    cores = [_core(i, "digital", [SubLayer(stage=s, kind="dense", inputs=1,
                                           neurons=1, has_bias=False,
                                           key=f"K{i}")])
             for i, s in enumerate([1, 0, 1, 0])]
    pos = place_cores(_alloc("digital", cores), MeshConfig(2, 2))
    # stage-0 cores (ids 1, 3) come first, row-major
    assert pos == {1: (0, 0), 3: (1, 0), 0: (0, 1), 2: (1, 1)}


def test_placement_rejects_small_mesh():
    alloc = map_network_dims(DEEP, "memristor")
    with pytest.raises(ValueError):
        place_cores(alloc, MeshConfig(6, 6))


def test_deep_placement_fills_minimal_mesh_without_overlap():
    alloc = map_network_dims(DEEP, "memristor")
    mesh = minimal_mesh(alloc.instance_cores)
    pos = place_cores(alloc, mesh)
    assert len(pos) == alloc.instance_cores
    assert len(set(pos.values())) == len(pos)
    assert all(0 <= x < mesh.width and 0 <= y < mesh.height
               for x, y in pos.values())
    # converter cores hug the sensor edge rows
    dac_rows = [pos[c.core_id][1] for c in alloc.cores
                if c.core_type == "memristor_dac"]
    other_rows = [pos[c.core_id][1] for c in alloc.cores
                  if c.core_type != "memristor_dac"]
    assert max(dac_rows) <= min(other_rows)


def test_uniform_dac_placement_spreads_rows():
    alloc = map_network_dims(DEEP, "memristor")
    mesh = minimal_mesh(alloc.instance_cores, dac_placement="uniform")
    pos = place_cores(alloc, mesh)
    assert len(set(pos.values())) == len(pos)
    dac_rows = {pos[c.core_id][1] for c in alloc.cores
                if c.core_type == "memristor_dac"}
    assert len(dac_rows) >= 3  # spread over the grid, not one edge band


def test_xy_route_is_minimal_and_x_first():
    route = xy_route((0, 0), (2, 1))
    assert route == [((0, 0), (1, 0)), ((1, 0), (2, 0)), ((2, 0), (2, 1))]
    assert xy_route((3, 2), (3, 2)) == []
    assert len(xy_route((4, 1), (0, 3))) == 4 + 2


def test_single_flow_slots_and_latency():
    # 8 neurons at 8 bits = 64 bits = 8 flits; one hop; 45 ns at 200 MHz
    prod = SubLayer(stage=0, kind="dense", inputs=4, neurons=8,
                    has_bias=False, key="A", consumer_key="B")
    cons = SubLayer(stage=1, kind="dense", inputs=8, neurons=2,
                    has_bias=False, key="B")
    alloc = _alloc("digital", [_core(0, "digital", [prod]),
                               _core(1, "digital", [cons])])
    mesh = MeshConfig(2, 1)
    table = build_schedule(alloc, place_cores(alloc, mesh), mesh)
    link = ((0, 0), (1, 0))
    mesh_flows = [f for f in table.flows if f.kind == "mesh"]
    assert len(mesh_flows) == 1
    assert mesh_flows[0].flits == 8
    assert sorted(s for s, _ in table.links[link]) == list(range(8))
    assert routing_latency(table, mesh.clock_hz) == pytest.approx(45e-9)


def test_loopback_costs_one_slot_and_no_links():
    prod = SubLayer(stage=0, kind="dense", inputs=4, neurons=8,
                    has_bias=False, key="A", consumer_key="B")
    cons = SubLayer(stage=1, kind="dense", inputs=8, neurons=2,
                    has_bias=False, key="B", consumer_key="")
    alloc = _alloc("digital", [_core(0, "digital", [prod, cons])])
    mesh = MeshConfig(1, 1)
    table = build_schedule(alloc, place_cores(alloc, mesh), mesh)
    loop = [f for f in table.flows if f.kind == "loopback"]
    assert len(loop) == 1
    assert loop[0].slots == 1 and loop[0].hops == 0 and loop[0].route == ()
    # only the egress flow contributes latency: 2 flits + 1 hop = 15 ns
    assert not any(link for link in table.links)
    assert routing_latency(table, mesh.clock_hz) == pytest.approx(15e-9)
    # loopback and egress burn no mesh-link energy
    assert routing_energy(table, 1000, mesh) == 0.0


def test_shared_link_gets_disjoint_slot_ranges():
    p0 = SubLayer(stage=0, kind="dense", inputs=4, neurons=8, has_bias=False,
                  key="A0", consumer_key="C", offset=0)
    p1 = SubLayer(stage=0, kind="dense", inputs=4, neurons=8, has_bias=False,
                  key="A1", consumer_key="C", offset=8)
    cons = SubLayer(stage=1, kind="dense", inputs=16, neurons=2,
                    has_bias=False, key="C", in_offset=0)
    alloc = _alloc("digital", [_core(0, "digital", [p0]),
                               _core(1, "digital", [p1]),
                               _core(2, "digital", [cons])])
    mesh = MeshConfig(3, 1)
    pos = {0: (0, 0), 1: (1, 0), 2: (2, 0)}
    table = build_schedule(alloc, pos, mesh)
    shared = table.links[((1, 0), (2, 0))]
    slots = [s for s, _ in shared]
    assert len(slots) == len(set(slots)) == 16
    a, b = (f for f in table.flows if f.kind == "mesh")
    # flow A holds the shared link at hop offset 1 (slots 1..8), so the
    # single-hop flow B cannot start before slot 9
    assert a.start_slot == 0 and b.start_slot == 9


def test_payload_split_follows_consumer_intervals():
    # producer covers neurons 0..20; consumers own 0..12 and 12..32
    prod = SubLayer(stage=0, kind="dense", inputs=4, neurons=20,
                    has_bias=False, key="A", consumer_key="C", offset=0)
    c0 = SubLayer(stage=1, kind="banked", inputs=24, neurons=12,
                  has_bias=False, fan_in=2, key="C", offset=0)
    c1 = SubLayer(stage=1, kind="banked", inputs=40, neurons=20,
                  has_bias=False, fan_in=2, key="C", offset=12)
    alloc = _alloc("memristor", [_core(0, "memristor_dac", [prod]),
                                 _core(1, "memristor_plain", [c0]),
                                 _core(2, "memristor_plain", [c1])])
    mesh = MeshConfig(3, 1)
    pos = {0: (0, 0), 1: (1, 0), 2: (2, 0)}
    table = build_schedule(alloc, pos, mesh)
    flows = {f.dst_core: f for f in table.flows if f.kind == "mesh"}
    assert flows[1].flits == 2  # 12 single-bit values
    assert flows[2].flits == 1  # remaining 8 values


def test_schedule_is_conflict_free_on_real_networks():
    for engine in ("memristor", "digital"):
        alloc = map_network_dims(DEEP, engine)
        _, table, _ = schedule_network(alloc)
        for link, taken in table.links.items():
            slots = [s for s, _ in taken]
            assert len(slots) == len(set(slots))
        for flow in table.flows:
            assert flow.hops == len(flow.route) or flow.kind == "egress"


def test_deep_routing_dominates_crossbar_cycles():
    alloc = map_network_dims(DEEP, "memristor")
    _, table, mesh = schedule_network(alloc)
    # two crossbar cycles at 200 MHz = 10 ns
    assert routing_latency(table, mesh.clock_hz) >= 10e-9


def test_wider_outputs_never_speed_up_the_mesh():
    alloc = map_network_dims(DEEP, "memristor")
    mesh = minimal_mesh(alloc.instance_cores)
    pos = place_cores(alloc, mesh)
    narrow = build_schedule(alloc, pos, mesh,
                            memristor_cfg=MemristorCoreConfig(output_bits=1))
    wide = build_schedule(alloc, pos, mesh,
                          memristor_cfg=MemristorCoreConfig(output_bits=8))
    assert (routing_latency(wide, mesh.clock_hz)
            >= routing_latency(narrow, mesh.clock_hz))
    assert routing_energy(wide, 1, mesh) > routing_energy(narrow, 1, mesh)


def test_routing_energy_arithmetic():
    route = (((0, 0), (1, 0)), ((1, 0), (2, 0)), ((2, 0), (2, 1)))
    table = SlotTable(flows=[Flow(flow_id=0, src_core=0, dst_core=1,
                                  kind="mesh", flits=1, route=route, hops=3,
                                  start_slot=0, slots=1)])
    mesh = MeshConfig(3, 2, hop_energy_pj_per_flit=1.0)
    assert routing_energy(table, 1, mesh) == pytest.approx(3e-12)
    assert routing_energy(table, 0, mesh) == 0.0
    assert routing_energy(table, 2_000_000, mesh) == pytest.approx(6e-6)
    broken = MeshConfig(3, 2, hop_energy_pj_per_flit=None)
    with pytest.raises(ValueError, match="unconfigured"):
        routing_energy(table, 1, broken)


def test_empty_table_has_zero_latency():
    assert routing_latency(SlotTable()) == 0.0


def test_schedules_are_deterministic():
    alloc = map_network_dims(DEEP, "digital")
    _, t1, _ = schedule_network(alloc)
    _, t2, _ = schedule_network(alloc)
    assert t1.to_json() == t2.to_json()
    parsed = json.loads(t1.to_json())
    assert len(parsed["flows"]) == len(t1.flows)
