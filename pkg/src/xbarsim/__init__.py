"""xbarsim: simulator and design-space explorer for multicore neural processors.

Models three execution substrates for always-on sensor inference: analog
memristor-crossbar threshold cores, digital SRAM MAC cores, and an analytic
RISC software baseline.  Networks are split and packed onto fixed-size cores,
cores are placed on a 2D mesh with static time-division routing, and system
throughput, area and power are estimated against published reference tables.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND, HAS_NUMBA

__all__ = ["BACKEND", "HAS_NUMBA", "__version__"]
