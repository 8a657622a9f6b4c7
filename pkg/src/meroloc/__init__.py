"""meroloc: locate zeros and poles of meromorphic functions.

Contour moments over rectangle boundaries are mapped to a slotted annulus,
fed through a Hankel-pencil (Prony) solve with an explicit condition bound
driving adaptive subdivision, and returned as z-space roots with integer
multiplicities and per-root error estimates.
"""

from .driver import RootReport, SearchConfig, locate, run_search
from .external import external_function
from .functions import (
    FunctionHandle,
    GyrokineticParams,
    Nlevp3Spec,
    RationalSpec,
    gamma_flr,
    make_gyrokinetic,
    make_nlevp3,
    make_plasma_z,
    make_rational,
    plasma_Z,
)
from .geometry import Rectangle, rect_from_corners
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "FunctionHandle",
    "GyrokineticParams",
    "KERNEL_BACKEND",
    "Nlevp3Spec",
    "RationalSpec",
    "Rectangle",
    "RootReport",
    "SearchConfig",
    "external_function",
    "gamma_flr",
    "locate",
    "make_gyrokinetic",
    "make_nlevp3",
    "make_plasma_z",
    "make_rational",
    "plasma_Z",
    "rect_from_corners",
    "run_search",
    "__version__",
]
