"""Experiment configuration.

Flat INI-style text with one section per module.  Every key has an
embedded default; a config file only overrides.  Unknown sections or
keys are rejected outright so a typo cannot silently fall back to a
default.  The canonical text form of the effective config (defaults
plus overrides, sorted) feeds a sha256 hash that reports embed, which
makes any emitted report traceable to the exact knob settings.
"""

import configparser
import hashlib
import os
from dataclasses import dataclass, field, fields, replace

from .apps import APP_IDS
from .cores import DigitalCoreConfig, MemristorCoreConfig
from .device import DeviceParams
from .estimator import (
    SWEEP_FIXED_AREA_FRACTION,
    SWEEP_FIXED_POWER_FRACTION,
)
from .noc import HOP_ENERGY_PJ_PER_FLIT
from .programmer import ProgrammingConfig

ARCHS = ("risc", "digital", "itim")


@dataclass(frozen=True)
class RunSection:
    apps: tuple = APP_IDS
    archs: tuple = ARCHS
    seed: int = 0
    out_dir: str = "reports"


@dataclass(frozen=True)
class DeviceSection:
    v_p: float = 4.0
    v_n: float = 4.0
    a_p: float = 816000.0
    a_n: float = 816000.0
    x_p: float = 0.9897
    x_n: float = 0.9897
    alpha_p: float = 0.2
    alpha_n: float = 0.2
    a1: float = 1.6e-4
    a2: float = 1.6e-4
    b: float = 0.05
    g_ratio: float = 1000.0
    rate_scale: float = 1.0


@dataclass(frozen=True)
class CrossbarSection:
    wire_r_segment: float = 1.0


@dataclass(frozen=True)
class ProgrammingSection:
    v_write: float = 4.25
    pulse_width: float = 1e-9
    max_pulses: int = 200
    sigma: float = 0.05
    tolerance_div: int = 128
    no_variation: bool = False


@dataclass(frozen=True)
class DigitalCoreSection:
    max_inputs: int = 256
    max_neurons: int = 128


@dataclass(frozen=True)
class MemristorCoreSection:
    max_inputs: int = 128
    max_neurons: int = 64
    output_bits: int = 1  # switch to 8 for full-width neuron outputs


@dataclass(frozen=True)
class NocSection:
    link_bits: int = 8
    clock_hz: float = 2e8
    hop_energy_pj_per_flit: float = HOP_ENERGY_PJ_PER_FLIT
    dac_placement: str = "edge"  # or "uniform"


@dataclass(frozen=True)
class PowerSection:
    nonvolatile_idle_off: bool = False
    include_interconnect: bool = True


@dataclass(frozen=True)
class SweepSection:
    fixed_area_fraction: float = SWEEP_FIXED_AREA_FRACTION
    fixed_power_fraction: float = SWEEP_FIXED_POWER_FRACTION
    memristor_sizes: tuple = ((32, 16), (64, 32), (128, 64), (256, 128),
                              (512, 256))
    digital_sizes: tuple = ((64, 32), (128, 64), (256, 128), (512, 256),
                            (1024, 512))


@dataclass(frozen=True)
class QuantSection:
    dataset: str = "mnist"  # mnist | cifar10 | glyphs
    train_subset: int = 10000
    test_subset: int = 2000
    hidden: tuple = (64,)
    epochs: int = 12
    lr: float = 0.05


@dataclass(frozen=True)
class DataSection:
    root: str = ""  # empty: fall back to the XBARSIM_DATA env var


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    device: DeviceSection = field(default_factory=DeviceSection)
    crossbar: CrossbarSection = field(default_factory=CrossbarSection)
    programming: ProgrammingSection = field(default_factory=ProgrammingSection)
    digital_core: DigitalCoreSection = field(default_factory=DigitalCoreSection)
    memristor_core: MemristorCoreSection = field(
        default_factory=MemristorCoreSection)
    noc: NocSection = field(default_factory=NocSection)
    power: PowerSection = field(default_factory=PowerSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    quant: QuantSection = field(default_factory=QuantSection)
    data: DataSection = field(default_factory=DataSection)

    # ---- materialize module-level config objects

    def device_params(self):
        d = self.device
        return DeviceParams(v_p=d.v_p, v_n=d.v_n, a_p=d.a_p, a_n=d.a_n,
                            x_p=d.x_p, x_n=d.x_n, alpha_p=d.alpha_p,
                            alpha_n=d.alpha_n, a1=d.a1, a2=d.a2, b=d.b,
                            g_ratio=d.g_ratio, rate_scale=d.rate_scale)

    def programming_config(self):
        p = self.programming
        return ProgrammingConfig(v_write=p.v_write, pulse_width=p.pulse_width,
                                 max_pulses=p.max_pulses, sigma=p.sigma,
                                 tolerance_div=p.tolerance_div)

    def digital_core_config(self):
        c = self.digital_core
        return DigitalCoreConfig(max_inputs=c.max_inputs,
                                 max_neurons=c.max_neurons,
                                 clock_hz=self.noc.clock_hz)

    def memristor_core_config(self):
        c = self.memristor_core
        return MemristorCoreConfig(max_inputs=c.max_inputs,
                                   max_neurons=c.max_neurons,
                                   output_bits=c.output_bits,
                                   link_bits=self.noc.link_bits,
                                   clock_hz=self.noc.clock_hz,
                                   device=self.device_params())

    def data_root(self):
        return self.data.root or os.environ.get("XBARSIM_DATA", "")


_SECTIONS = {
    "run": RunSection,
    "device": DeviceSection,
    "crossbar": CrossbarSection,
    "programming": ProgrammingSection,
    "digital_core": DigitalCoreSection,
    "memristor_core": MemristorCoreSection,
    "noc": NocSection,
    "power": PowerSection,
    "sweep": SweepSection,
    "quant": QuantSection,
    "data": DataSection,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(text):
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_names(text):
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_sizes(text):
    sizes = []
    for part in _parse_names(text):
        rows, _, cols = part.partition("x")
        sizes.append((int(rows), int(cols)))
    return tuple(sizes)


def _parse_ints(text):
    return tuple(int(part) for part in _parse_names(text))


# tuple-valued keys need a dedicated parser; scalars coerce by type
_TUPLE_PARSERS = {
    ("run", "apps"): _parse_names,
    ("run", "archs"): _parse_names,
    ("sweep", "memristor_sizes"): _parse_sizes,
    ("sweep", "digital_sizes"): _parse_sizes,
    ("quant", "hidden"): _parse_ints,
}


def _coerce(section, key, kind, text):
    if (section, key) in _TUPLE_PARSERS:
        return _TUPLE_PARSERS[section, key](text)
    if kind is bool:
        return _parse_bool(text)
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text.strip()


def parse_config(text):
    """Effective config from INI text; unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    sections = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ValueError(f"unknown config section [{name}]")
        cls = _SECTIONS[name]
        known = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ValueError(f"unknown key {key!r} in section [{name}]")
            values[key] = _coerce(name, key, known[key], raw)
        sections[name] = cls(**values)
    cfg = ExperimentConfig(**sections)
    validate_config(cfg)
    return cfg


def load_config(path=None):
    if path is None:
        cfg = ExperimentConfig()
        validate_config(cfg)
        return cfg
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate_config(cfg: ExperimentConfig):
    for app in cfg.run.apps:
        if app not in APP_IDS:
            raise ValueError(f"unknown app id {app!r}")
    for arch in cfg.run.archs:
        if arch not in ARCHS:
            raise ValueError(f"unknown architecture {arch!r}")
    if cfg.run.seed < 0:
        raise ValueError("seed must be >= 0")
    if cfg.crossbar.wire_r_segment < 0:
        raise ValueError("wire resistance cannot be negative")
    if not 0 <= cfg.programming.sigma < 1:
        raise ValueError("variation sigma must lie in [0, 1)")
    for name in ("digital_core", "memristor_core"):
        sec = getattr(cfg, name)
        if sec.max_inputs < 2 or sec.max_neurons < 1:
            raise ValueError(f"{name} dimensions too small")
    if cfg.memristor_core.output_bits not in (1, 8):
        raise ValueError("memristor output width is 1 or 8 bits")
    if cfg.noc.dac_placement not in ("edge", "uniform"):
        raise ValueError("dac_placement is 'edge' or 'uniform'")
    if cfg.quant.train_subset <= 0 or cfg.quant.test_subset <= 0:
        raise ValueError("dataset subsets must be positive")
    for sizes in (cfg.sweep.memristor_sizes, cfg.sweep.digital_sizes):
        for rows, cols in sizes:
            if rows < 2 or cols < 1:
                raise ValueError(f"bad sweep size {rows}x{cols}")
    return cfg


def _format_value(value):
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ",".join(f"{r}x{c}" for r, c in value)
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_text(cfg: ExperimentConfig):
    """Canonical INI rendering of the effective config."""
    lines = []
    for name in sorted(_SECTIONS):
        lines.append(f"[{name}]")
        section = getattr(cfg, name)
        for f in sorted(fields(section), key=lambda f: f.name):
            lines.append(f"{f.name} = "
                         f"{_format_value(getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: ExperimentConfig):
    """sha256 of the canonical text; embedded in every report."""
    return hashlib.sha256(config_text(cfg).encode("utf-8")).hexdigest()
