"""Real-time workload catalog and published reference figures.

Five sensor applications, each defined by its pattern rate and the
network configurations used on each architecture.  Multi-network
entries execute as one pipeline.  The edge-detection entry for the
crossbar system lists three auxiliary networks that widen the one-bit
outputs; the published sizing covers the primary window pipeline (its
reported power runs at the duty cycle of exactly that two-core
pipeline), so only the primary network participates in core counting
and the auxiliaries are carried as catalog data.

RISC baselines: the network apps are costed per synapse from the
reference core's measured time; edge and motion run classical
algorithms on RISC, so their per-pattern times are calibration
constants chosen to reproduce the published core counts at the stated
stream geometry.
"""

import math
from dataclasses import dataclass, field

from .cores import RISC_TIME_PER_SYNAPSE

EDGE_PATTERN_RATE = 1280 * 1080 * 60.0  # one pattern per output pixel
MOTION_PATTERN_RATE = 1280 * 1080 * 60.0 / 64.0  # one pattern per 8x8 grid
CHAR_RATE = 1e5  # characters (or images) per second

# CALIBRATION: per-pattern RISC times for the two non-network apps,
# back-derived from the published sizing at the 1280x1080@60 stream
RISC_EDGE_TIME_PER_PATTERN = 240 / EDGE_PATTERN_RATE
RISC_MOTION_TIME_PER_PATTERN = 7 / MOTION_PATTERN_RATE


@dataclass(frozen=True)
class AppSpec:
    name: str
    rate: float  # patterns per second
    sweep_rate: float  # rate at the 2500x2500 design-space frame size
    input_bits: int  # sensor bits entering the first stage per pattern
    networks: dict  # arch -> list of networks (each a layer_dims list)
    sized_networks: dict  # arch -> how many of those networks are sized
    risc_synapses: int = 0  # 0 means the RISC baseline is non-network

    def pipeline(self, arch):
        """Layer dims actually mapped: the sized networks, chained."""
        nets = self.networks[arch][:self.sized_networks[arch]]
        return [layer for net in nets for layer in net]

    def risc_time_per_pattern(self):
        if self.risc_synapses:
            return self.risc_synapses * RISC_TIME_PER_SYNAPSE
        if self.name == "edge":
            return RISC_EDGE_TIME_PER_PATTERN
        if self.name == "motion":
            return RISC_MOTION_TIME_PER_PATTERN
        raise ValueError(f"no RISC model for {self.name}")


def _nets(*nets):
    return [list(n) for n in nets]


APP_IDS = ("deep", "edge", "motion", "objrec", "ocr")

_DEEP_NET = [("dense", 784, 200, True), ("dense", 200, 100, True),
             ("dense", 100, 10, True)]
_OBJREC_NET = [("dense", 3072, 100, True), ("dense", 100, 10, True)]
_OCR_NET = [("dense", 2500, 60, True), ("dense", 60, 26, True)]


def catalog():
    """The five workloads; deterministic fresh copies."""
    apps = {
        "deep": AppSpec(
            name="deep", rate=CHAR_RATE, sweep_rate=CHAR_RATE,
            input_bits=784 * 8,
            networks={"memristor": _nets(_DEEP_NET),
                      "digital": _nets(_DEEP_NET)},
            sized_networks={"memristor": 1, "digital": 1},
            risc_synapses=784 * 200 + 200 * 100 + 100 * 10),
        "edge": AppSpec(
            name="edge", rate=EDGE_PATTERN_RATE,
            sweep_rate=2500 * 2500 * 60.0, input_bits=9 * 8,
            networks={
                "memristor": _nets(
                    [("dense", 9, 20, True), ("dense", 20, 15, True)],
                    [("dense", 24, 20, True), ("dense", 20, 15, True)],
                    [("dense", 15, 10, True), ("dense", 10, 4, True)],
                    [("dense", 15, 10, True), ("dense", 10, 4, True)]),
                "digital": _nets(
                    [("dense", 9, 20, True), ("dense", 20, 1, True)]),
            },
            sized_networks={"memristor": 1, "digital": 1}),
        "motion": AppSpec(
            name="motion", rate=MOTION_PATTERN_RATE,
            sweep_rate=2500 * 2500 * 60.0 / 64.0, input_bits=128 * 8,
            networks={
                "memristor": _nets(
                    [("banked", 2, 64, True)],
                    [("dense", 64, 10, True)],
                    [("dense", 20, 10, True)]),
                "digital": _nets(
                    [("banked", 2, 64, True)],
                    [("dense", 64, 1, True)],
                    [("dense", 2, 1, True)]),
            },
            sized_networks={"memristor": 3, "digital": 3}),
        "objrec": AppSpec(
            name="objrec", rate=CHAR_RATE, sweep_rate=CHAR_RATE,
            input_bits=3072 * 8,
            networks={"memristor": _nets(_OBJREC_NET),
                      "digital": _nets(_OBJREC_NET)},
            sized_networks={"memristor": 1, "digital": 1},
            risc_synapses=3072 * 100 + 100 * 10),
        "ocr": AppSpec(
            name="ocr", rate=CHAR_RATE, sweep_rate=CHAR_RATE,
            input_bits=2500 * 8,
            networks={"memristor": _nets(_OCR_NET),
                      "digital": _nets(_OCR_NET)},
            sized_networks={"memristor": 1, "digital": 1},
            risc_synapses=2500 * 60 + 60 * 26),
    }
    return apps


# Published reference figures for the five workloads: core count,
# area (mm^2), power (mW) and power efficiency over RISC, per
# architecture.  Kept as data for delta reporting; never used to steer
# the mapper.
PUBLISHED_RESULTS = {
    "deep": {
        "risc": (902, 472.65, 78474.00, 1),
        "digital": (9, 1.88, 82.40, 952),
        "itim": (31, 0.25, 0.42, 187064),
    },
    "edge": {
        "risc": (240, 125.76, 20880.00, 1),
        "digital": (18, 3.75, 433.16, 48),
        "itim": (16, 0.13, 1.41, 14813),
    },
    "motion": {
        "risc": (7, 3.67, 609.00, 1),
        "digital": (2, 0.42, 42.57, 14),
        "itim": (2, 0.02, 0.11, 5641),
    },
    "objrec": {
        "risc": (1358, 711.59, 118146.00, 1),
        "digital": (17, 3.54, 148.55, 795),
        "itim": (68, 0.56, 0.94, 125430),
    },
    "ocr": {
        "risc": (825, 432.30, 71775.00, 1),
        "digital": (13, 2.71, 119.08, 603),
        "itim": (31, 0.25, 0.49, 147012),
    },
}


def risc_core_count(app: AppSpec, rate=None):
    """Cores needed so the always-on RISC pool keeps up with the rate."""
    rate = app.rate if rate is None else rate
    if rate <= 0:
        raise ValueError("rate must be positive")
    return math.ceil(rate * app.risc_time_per_pattern() - 1e-9)
