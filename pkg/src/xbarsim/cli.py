"""Command line front end.

Subcommands: `tables` (cost reports plus delta against the published
reference figures), `quant` (desk-scale quantization study), `validate`
(solver, device, and programming check suites with a JUnit-style
results file), `sweep` (design-space CSVs), `map` (dump one mapped
allocation), `program` (dump a programming Monte-Carlo report).

Every run is reproducible: reports carry the config hash, the seed and
the calibration constants, and repeated runs with the same config and
seed emit byte-identical files.  Nothing here timestamps its output.
"""

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import sys
import warnings
from pathlib import Path
from xml.etree import ElementTree

import numpy as np

from .apps import (
    APP_IDS,
    PUBLISHED_RESULTS,
    RISC_EDGE_TIME_PER_PATTERN,
    RISC_MOTION_TIME_PER_PATTERN,
    catalog,
    risc_core_count,
)
from .config import ARCHS, config_hash, load_config
from .cores import RISC_TIME_PER_SYNAPSE
from .crossbar import (
    ideal_column_voltage,
    layer_to_pairs,
    nonideal_solve,
    threshold_readout,
)
from .datasets import (
    load_cifar10,
    load_glyph_dir,
    load_mnist,
    split_train_test,
    synthetic_glyphs,
)
from .device import small_signal_conductance, step_state, switching_time
from .estimator import (
    TSV_ENERGY_PJ_PER_BIT,
    UnderProvisionedWarning,
    design_space_sweep,
    evaluate_app,
    sweep_to_csv,
    within_orders_of_magnitude,
)
from .mapper import core_latencies, map_network_dims
from .nnmodel import (
    SIGMOID,
    THRESHOLD,
    evaluate_accuracy,
    init_network,
    one_hot_targets,
    quantize,
    train_sgd,
)
from .noc import minimal_mesh, routing_energy, routing_latency, schedule_network
from .programmer import program_pairs, program_targets

QUANT_BITS = (8, 6, 4)


# ---------------------------------------------------------------- plumbing

def _plain(obj):
    """Recursively strip numpy types so json.dumps stays deterministic."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def _meta(cfg, command):
    return {
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": cfg.run.seed,
        "calibration": {
            "risc_time_per_synapse_s": RISC_TIME_PER_SYNAPSE,
            "risc_edge_time_per_pattern_s": RISC_EDGE_TIME_PER_PATTERN,
            "risc_motion_time_per_pattern_s": RISC_MOTION_TIME_PER_PATTERN,
            "hop_energy_pj_per_flit": cfg.noc.hop_energy_pj_per_flit,
            "tsv_energy_pj_per_bit": TSV_ENERGY_PJ_PER_BIT,
            "sweep_fixed_area_fraction": cfg.sweep.fixed_area_fraction,
            "sweep_fixed_power_fraction": cfg.sweep.fixed_power_fraction,
            "device_rate_scale": cfg.device.rate_scale,
        },
    }


def _write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8")
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def _write_json(path, payload):
    return _write_text(path, json.dumps(_plain(payload), indent=2,
                                        sort_keys=True) + "\n")


def _csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _selected_apps(cfg):
    apps = catalog()
    return [apps[name] for name in cfg.run.apps]


# ----------------------------------------------------------------- tables

DELTA_COLUMNS = ("app", "arch", "cores", "cores_published", "core_ratio",
                 "area_mm2", "area_published_mm2", "power_mw",
                 "power_published_mw", "efficiency", "efficiency_published",
                 "within_tolerance")


def cmd_tables(cfg, out):
    """Cost reports for every selected (app, arch) plus the delta table.

    Hard pass/fail: mapped core counts within +-50% of the published
    figures, and crossbar-system efficiency within the three-to-five
    orders band.  Power/area deltas are informative.
    """
    results = {}
    delta_rows = []
    all_ok = True
    for app in _selected_apps(cfg):
        results[app.name] = {}
        for arch in cfg.run.archs:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UnderProvisionedWarning)
                rep = evaluate_app(
                    app, arch,
                    nonvolatile_idle_off=cfg.power.nonvolatile_idle_off,
                    include_interconnect=cfg.power.include_interconnect,
                    digital_cfg=cfg.digital_core_config(),
                    memristor_cfg=cfg.memristor_core_config())
            pub_cores, pub_area, pub_power, pub_eff = (
                PUBLISHED_RESULTS[app.name][arch])
            ratio = rep.cores / pub_cores
            ok = 0.5 <= ratio <= 1.5
            if arch == "itim":
                ok = ok and within_orders_of_magnitude(rep.efficiency_vs_risc)
            all_ok = all_ok and ok
            results[app.name][arch] = {
                "cores": rep.cores,
                "area_mm2": rep.area_mm2,
                "power_mw": rep.power_mw,
                "efficiency_vs_risc": rep.efficiency_vs_risc,
                "breakdown": dataclasses.asdict(rep.breakdown),
                "published": {"cores": pub_cores, "area_mm2": pub_area,
                              "power_mw": pub_power, "efficiency": pub_eff},
            }
            delta_rows.append([
                app.name, arch, rep.cores, pub_cores, f"{ratio:.4f}",
                f"{rep.area_mm2:.4f}", f"{pub_area:.4f}",
                f"{rep.power_mw:.4f}", f"{pub_power:.4f}",
                f"{rep.efficiency_vs_risc:.1f}", f"{pub_eff:.1f}",
                "yes" if ok else "no"])
    csv_text = _csv_text(DELTA_COLUMNS, delta_rows)
    csv_hash = _write_text(out / "tables_delta.csv", csv_text)
    payload = {"meta": _meta(cfg, "tables"), "results": results,
               "delta_csv_sha256": csv_hash, "pass": all_ok}
    _write_json(out / "tables.json", payload)
    print(f"tables: {len(delta_rows)} cells -> {out / 'tables.json'}"
          f" ({'pass' if all_ok else 'FAIL'})")
    return 0 if all_ok else 1


# -------------------------------------------------------------------- map

def cmd_map(cfg, out, app_name, arch):
    """Dump one allocation: cores, entries, placement, slot table."""
    app = catalog()[app_name]
    if arch == "risc":
        payload = {"meta": _meta(cfg, "map"), "app": app_name, "arch": arch,
                   "cores": risc_core_count(app),
                   "time_per_pattern_s": app.risc_time_per_pattern()}
        _write_json(out / f"map_{app_name}_{arch}.json", payload)
        print(f"map: {app_name}/{arch} -> {payload['cores']} cores")
        return 0
    engine = "memristor" if arch == "itim" else "digital"
    mem_cfg = cfg.memristor_core_config()
    dig_cfg = cfg.digital_core_config()
    alloc = map_network_dims(app.pipeline(engine), engine,
                             required_rate=app.rate,
                             digital_cfg=dig_cfg, memristor_cfg=mem_cfg)
    mesh = minimal_mesh(alloc.instance_cores,
                        link_bits=cfg.noc.link_bits,
                        clock_hz=cfg.noc.clock_hz,
                        hop_energy_pj_per_flit=cfg.noc.hop_energy_pj_per_flit,
                        dac_placement=cfg.noc.dac_placement)
    placement, table, mesh = schedule_network(alloc, mesh=mesh,
                                              memristor_cfg=mem_cfg)
    latencies = core_latencies(alloc.cores, engine, dig_cfg, mem_cfg)
    cores = []
    for core, lat in zip(alloc.cores, latencies):
        cores.append({
            "core_id": core.core_id,
            "type": core.core_type,
            "rows_used": core.rows_used,
            "cols_used": core.cols_used,
            "slots_used": core.slots_used,
            "latency_s": lat,
            "position": list(placement[core.core_id]),
            "entries": [dataclasses.asdict(e) for e in core.entries],
        })
    payload = {
        "meta": _meta(cfg, "map"),
        "app": app_name, "arch": arch, "engine": engine,
        "instance_cores": alloc.instance_cores,
        "replication": alloc.replication,
        "total_cores": alloc.total_cores,
        "required_rate": alloc.required_rate,
        "max_core_latency_s": alloc.max_core_latency,
        "mesh": {"width": mesh.width, "height": mesh.height},
        "cores": cores,
        "slot_table": table.to_json(),
        "routing_latency_s": routing_latency(table, mesh.clock_hz),
        "routing_energy_per_pattern_j": routing_energy(table, 1, mesh),
    }
    _write_json(out / f"map_{app_name}_{arch}.json", payload)
    print(f"map: {app_name}/{arch} -> {alloc.instance_cores} cores x"
          f" {alloc.replication} replicas")
    return 0


# ---------------------------------------------------------------- program

def cmd_program(cfg, out, no_variation):
    """Program a batch of random conductance targets, dump the stats."""
    params = cfg.device_params()
    pcfg = cfg.programming_config()
    off = no_variation or cfg.programming.no_variation
    rng = np.random.default_rng(cfg.run.seed)
    targets = rng.uniform(params.g_min, params.g_max, size=2000)
    report = program_targets(params, targets, pcfg, seed=cfg.run.seed,
                             no_variation=off)
    hist = np.bincount(report.pulses.astype(np.int64),
                       minlength=pcfg.max_pulses + 1)
    payload = {
        "meta": _meta(cfg, "program"),
        "targets": int(targets.size),
        "sigma": 0.0 if off else pcfg.sigma,
        "no_variation": bool(off),
        "tolerance_s": pcfg.tolerance(params),
        "fraction_converged": report.fraction_converged,
        "mean_pulses": report.mean_pulses,
        "max_pulses_used": int(report.pulses.max()),
        "pulse_histogram": hist.tolist(),
    }
    _write_json(out / "program.json", payload)
    print(f"program: {targets.size} targets, "
          f"{report.fraction_converged:.2%} converged, "
          f"mean {report.mean_pulses:.1f} pulses")
    return 0


# --------------------------------------------------------------- validate

def _case(cases, name, ok, message, **details):
    cases.append({"name": name, "ok": bool(ok), "message": message,
                  "details": _plain(details)})


def _junit_text(cases):
    suite = ElementTree.Element("testsuite", {
        "name": "crossbar-validation",
        "tests": str(len(cases)),
        "failures": str(sum(not c["ok"] for c in cases)),
    })
    for case in cases:
        tc = ElementTree.SubElement(suite, "testcase", {
            "classname": "xbarsim.validate", "name": case["name"]})
        if not case["ok"]:
            fail = ElementTree.SubElement(tc, "failure",
                                          {"message": case["message"]})
            fail.text = json.dumps(_plain(case["details"]), sort_keys=True)
    ElementTree.indent(suite)
    return ElementTree.tostring(suite, encoding="unicode",
                                xml_declaration=True) + "\n"


def cmd_validate(cfg, out, no_variation):
    """Solver, device and programming suites; JUnit-style results file."""
    params = cfg.device_params()
    pcfg = cfg.programming_config()
    off = no_variation or cfg.programming.no_variation
    seed = cfg.run.seed
    cases = []

    # nodal solver degenerates to the ideal divider without wire loss
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        gp = rng.uniform(params.g_min, params.g_max, size=(128, 64))
        gm = rng.uniform(params.g_min, params.g_max, size=(128, 64))
        v = rng.uniform(0.0, 1.0, size=128)
        dp = nonideal_solve(gp, gm, v, wire_r=0.0)
        ref = ideal_column_voltage(gp, gm, v)
        worst = max(worst, float(np.max(
            np.abs(dp - ref) / np.maximum(np.abs(ref), 1e-30))))
    _case(cases, "solver_zero_wire_equivalence", worst <= 1e-9,
          f"worst relative error {worst:.3e} over 100 random 128x64",
          worst_relative_error=worst, instances=100, bound=1e-9)

    # IR drop error grows with wire resistance
    gp = rng.uniform(params.g_min, params.g_max, size=(64, 32))
    gm = rng.uniform(params.g_min, params.g_max, size=(64, 32))
    v = rng.uniform(0.0, 1.0, size=64)
    ref = ideal_column_voltage(gp, gm, v)
    wire_rs = (0.0, 0.5, 1.0, 2.0, 4.0)
    errs = [float(np.max(np.abs(nonideal_solve(gp, gm, v, wire_r=wr) - ref)))
            for wr in wire_rs]
    monotone = all(a <= b for a, b in zip(errs, errs[1:]))
    _case(cases, "solver_error_monotone_in_wire_r", monotone,
          "max error per wire resistance " + str([f"{e:.2e}" for e in errs]),
          wire_r=list(wire_rs), max_error=errs)

    # full-range switching lands on the calibrated 80 ns
    t_sw = switching_time(params, pcfg.v_write, 0.001, 0.99)
    _case(cases, "device_switching_time",
          0.8 * 80e-9 <= t_sw <= 1.2 * 80e-9,
          f"0.001 -> 0.99 at {pcfg.v_write} V in {t_sw * 1e9:.1f} ns",
          seconds=t_sw, drive_v=pcfg.v_write, target_ns=80.0)

    # reads never disturb: sub-threshold drive leaves the state bits equal
    inert = True
    for x in (0.001, 0.3, 0.99):
        for drive in (4.0, -4.0, 0.5, -0.5):
            if step_state(params, x, drive, 1e-6, 1e-9) != x:
                inert = False
    _case(cases, "device_inert_below_threshold", inert,
          "states unchanged for |V| <= 4.0 over 1 us",
          thresholds=[params.v_p, params.v_n])

    # exact up to the binary representation of the decimal constants
    r_on = 1.0 / small_signal_conductance(params, 1.0)
    _case(cases, "device_full_on_resistance",
          abs(r_on - 125000.0) <= 125000.0 * 1e-12,
          f"R(x=1) = {r_on:.1f} ohm", r_on_ohm=float(r_on))

    # program-and-verify Monte Carlo
    targets = rng.uniform(params.g_min, params.g_max, size=10000)
    rep = program_targets(params, targets, pcfg, seed=seed,
                          no_variation=off)
    frac = float(np.mean(rep.converged & (rep.pulses <= 100)))
    _case(cases, "programming_convergence", frac >= 0.95,
          f"{frac:.2%} of {targets.size} targets converged in <= 100 pulses",
          fraction=frac, targets=int(targets.size),
          sigma=0.0 if off else pcfg.sigma)

    # end-to-end: programmed crossbar vs exact weights, per decision
    rng2 = np.random.default_rng(seed + 1)
    w = rng2.normal(0.0, 1.0, size=(127, 64))
    b = rng2.normal(0.0, 0.2, size=64)
    gp, gm = layer_to_pairs(w, b, params)
    pp, pm, _ = program_pairs(params, gp, gm, pcfg, seed=seed + 1,
                              no_variation=off)
    x = rng2.uniform(0.0, 1.0, size=(1000, 128))
    x[:, -1] = 1.0  # bias rail
    exact = threshold_readout(ideal_column_voltage(gp, gm, x))
    prog = threshold_readout(ideal_column_voltage(pp, pm, x))
    agree = float(np.mean(exact == prog))
    _case(cases, "programmed_forward_agreement", agree >= 0.98,
          f"{agree:.2%} of threshold decisions agree over 1000 inputs",
          agreement=agree, inputs=1000, outputs=64)

    # determinism spot check: same seed, same pulse trace
    again = program_targets(params, targets[:200], pcfg, seed=seed,
                            no_variation=off)
    twice = program_targets(params, targets[:200], pcfg, seed=seed,
                            no_variation=off)
    same = bool(np.array_equal(again.pulses, twice.pulses)
                and np.array_equal(again.state, twice.state))
    _case(cases, "programming_deterministic_under_seed", same,
          "repeated 200-target run matches pulse for pulse")

    failures = [c for c in cases if not c["ok"]]
    xml_hash = _write_text(out / "validate.xml", _junit_text(cases))
    payload = {"meta": _meta(cfg, "validate"), "cases": cases,
               "junit_sha256": xml_hash, "pass": not failures}
    _write_json(out / "validate.json", payload)
    for case in cases:
        print(f"validate: {'pass' if case['ok'] else 'FAIL'} "
              f"{case['name']}: {case['message']}")
    return 0 if not failures else 1


# ------------------------------------------------------------------ quant

def _load_quant_dataset(cfg):
    """(train, test, info) for the configured dataset, or SystemExit."""
    name = cfg.quant.dataset
    root = cfg.data_root() or None
    if name == "glyphs":
        data = load_glyph_dir(Path(root) / "glyphs" if root else None)
        synthetic = data is None
        if synthetic:
            x, y = synthetic_glyphs(seed=cfg.run.seed + 7)
        else:
            x, y = data
        train, test = split_train_test(x, y, seed=cfg.run.seed + 13)
        info = {"dataset": name, "classes": int(y.max()) + 1,
                "synthetic": synthetic}
        return train, test, info
    loader = {"mnist": load_mnist, "cifar10": load_cifar10}[name]
    data = loader(Path(root) / name if root else None)
    if data is None:
        raise SystemExit(
            f"dataset {name!r} not found; point XBARSIM_DATA or [data] "
            "root at it, or set [quant] dataset = glyphs")
    train, test = data
    info = {"dataset": name, "classes": int(train[1].max()) + 1,
            "synthetic": False}
    return train, test, info


def cmd_quant(cfg, out):
    """Accuracy table: float/8/6/4-bit weights x sigmoid/threshold."""
    (tx, ty), (vx, vy), info = _load_quant_dataset(cfg)
    tx, ty = tx[:cfg.quant.train_subset], ty[:cfg.quant.train_subset]
    vx, vy = vx[:cfg.quant.test_subset], vy[:cfg.quant.test_subset]
    n_classes = info["classes"]
    dims = [tx.shape[1], *cfg.quant.hidden, n_classes]
    table = {}
    for act in (SIGMOID, THRESHOLD):
        net = init_network(dims, [act] * (len(dims) - 1),
                           seed=cfg.run.seed)
        targets = one_hot_targets(ty, n_classes, act)
        net, _losses = train_sgd(net, tx.astype(np.float64) / 255.0,
                                 targets, epochs=cfg.quant.epochs,
                                 lr=cfg.quant.lr, seed=cfg.run.seed)
        accs = {"float": evaluate_accuracy(net, vx, vy, engine="float")}
        for bits in QUANT_BITS:
            qnet = quantize(net, bits)
            accs[str(bits)] = evaluate_accuracy(qnet, vx, vy,
                                                engine="quantized")
        table[act] = accs
    rows = [[act, bits, f"{table[act][bits]:.4f}"]
            for act in (SIGMOID, THRESHOLD)
            for bits in ("float", "8", "6", "4")]
    csv_hash = _write_text(out / "quant.csv",
                           _csv_text(("activation", "bits", "accuracy"),
                                     rows))
    payload = {
        "meta": _meta(cfg, "quant"),
        "data": {**info, "train": int(len(ty)), "test": int(len(vy))},
        "dims": dims,
        "accuracy": table,
        "gaps": {
            "sigmoid_8bit": table[SIGMOID]["float"] - table[SIGMOID]["8"],
            "threshold_8bit": (table[THRESHOLD]["float"]
                               - table[THRESHOLD]["8"]),
        },
        "csv_sha256": csv_hash,
    }
    _write_json(out / "quant.json", payload)
    for act in (SIGMOID, THRESHOLD):
        print(f"quant: {act} " + " ".join(
            f"{bits}={table[act][bits]:.4f}"
            for bits in ("float", "8", "6", "4")))
    return 0


# ------------------------------------------------------------------ sweep

def cmd_sweep(cfg, out):
    """One design-space CSV per neural architecture."""
    apps = _selected_apps(cfg)
    files = {}
    for arch in cfg.run.archs:
        if arch == "risc":
            continue
        sizes = (cfg.sweep.memristor_sizes if arch == "itim"
                 else cfg.sweep.digital_sizes)
        rows = design_space_sweep(
            apps, arch, sizes=sizes,
            fixed_area=cfg.sweep.fixed_area_fraction,
            fixed_power=cfg.sweep.fixed_power_fraction)
        name = f"sweep_{arch}.csv"
        files[name] = _write_text(out / name, sweep_to_csv(rows))
        print(f"sweep: {arch} {len(rows)} rows -> {out / name}")
    if not files:
        raise SystemExit("sweep needs a neural architecture "
                         "(digital or itim) in [run] archs")
    payload = {"meta": _meta(cfg, "sweep"), "files_sha256": files}
    _write_json(out / "sweep.json", payload)
    return 0


# ------------------------------------------------------------------- main

def _build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH",
                        help="experiment config file (INI sections)")
    shared.add_argument("--seed", type=int, help="override [run] seed")
    shared.add_argument("--out", metavar="DIR",
                        help="override [run] out_dir")
    shared.add_argument("--arch", choices=ARCHS,
                        help="restrict to one architecture")
    shared.add_argument("--app", choices=APP_IDS,
                        help="restrict to one application")
    shared.add_argument("--no-variation", action="store_true",
                        help="disable programming variation")
    parser = argparse.ArgumentParser(
        prog="xbarsim",
        description="Multicore neural processor simulator and design "
                    "space explorer")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("tables", parents=[shared],
                   help="cost reports and delta against published figures")
    sub.add_parser("quant", parents=[shared],
                   help="quantization accuracy study")
    sub.add_parser("validate", parents=[shared],
                   help="solver/device/programming check suites")
    sub.add_parser("sweep", parents=[shared],
                   help="design-space sweep CSVs")
    sub.add_parser("map", parents=[shared],
                   help="dump one application's core allocation")
    sub.add_parser("program", parents=[shared],
                   help="dump a programming Monte-Carlo report")
    return parser


def _resolve_config(args):
    cfg = load_config(args.config)
    run = cfg.run
    if args.seed is not None:
        run = dataclasses.replace(run, seed=args.seed)
    if args.out is not None:
        run = dataclasses.replace(run, out_dir=args.out)
    if args.app is not None:
        run = dataclasses.replace(run, apps=(args.app,))
    if args.arch is not None:
        run = dataclasses.replace(run, archs=(args.arch,))
    return dataclasses.replace(cfg, run=run)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except (OSError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    out = Path(cfg.run.out_dir)
    if args.command == "tables":
        return cmd_tables(cfg, out)
    if args.command == "quant":
        return cmd_quant(cfg, out)
    if args.command == "validate":
        return cmd_validate(cfg, out, args.no_variation)
    if args.command == "sweep":
        return cmd_sweep(cfg, out)
    if args.command == "map":
        if args.app is None or args.arch is None:
            print("map needs --app and --arch", file=sys.stderr)
            return 2
        return cmd_map(cfg, out, args.app, args.arch)
    if args.command == "program":
        return cmd_program(cfg, out, args.no_variation)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
