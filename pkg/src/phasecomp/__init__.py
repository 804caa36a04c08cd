"""Simulation of nonlocal phase compensation with momentum-entangled photon pairs.

The package models a two-photon source whose polarization entanglement is
degraded by an angle-dependent phase, the SLM masks that purify it or
imprint phase objects, and the measurements built on top: coincidence
scans, ghost phase imaging, visibility, tomography, CHSH and a key
distribution protocol.
"""

__version__ = "0.1.0"

from .errors import (ConvergenceError, DegenerateDataError, DomainError,  # noqa: E402
                     InvalidModelError, NumericalError, PhasecompError)
from .source import SourceModel  # noqa: E402
from .optics import PhaseLayout, PhaseMask  # noqa: E402
from .state import TwoQubitState, epsilon, werner_dephased  # noqa: E402
from .measurement import DetectionConfig  # noqa: E402

__all__ = [
    "ConvergenceError", "DegenerateDataError", "DetectionConfig", "DomainError",
    "InvalidModelError", "NumericalError", "PhaseLayout", "PhaseMask", "PhasecompError",
    "SourceModel", "TwoQubitState", "epsilon", "werner_dephased",
]
