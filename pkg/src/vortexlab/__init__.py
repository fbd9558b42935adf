"""Vortex dynamics toolkit: point vortices, Gross-Pitaevskii fields, weak norms,
2D Euler references and random vortex data."""

__version__ = "0.1.0"

from .errors import (ConvergenceError, HypothesisError, InvariantError, LocalizationError,
                     SingularityError, UnbalancedMeasureError)
from .geometry import VortexConfiguration, energies, kirchhoff_onsager, separation_scales
from .norms import AtomicMeasure, GridMeasure, NormBracket, minimal_connection, xlog_distance

__all__ = [
    "__version__", "AtomicMeasure", "ConvergenceError", "GridMeasure", "HypothesisError",
    "InvariantError", "LocalizationError", "NormBracket", "SingularityError",
    "UnbalancedMeasureError", "VortexConfiguration", "energies", "kirchhoff_onsager",
    "minimal_connection", "separation_scales", "xlog_distance",
]
