"""qcond: finite-temperature quantum condensation toolkit.

Exact restricted thermodynamics, trajectory-sampling Monte Carlo with
matching compiled and pure-Python kernels, closed-form and spectral
critical-surface solvers, and the configuration-graph combinatorics that
ties them together.
"""

from .errors import (
    BoundViolation,
    EmptySubspace,
    InvalidBeta,
    NoBracket,
    NonConvergence,
    OutOfRange,
    QCondError,
    SignProblem,
    TooLarge,
    WrongSide,
)

__version__ = "0.1.0"

__all__ = [
    "BoundViolation",
    "EmptySubspace",
    "InvalidBeta",
    "NoBracket",
    "NonConvergence",
    "OutOfRange",
    "QCondError",
    "SignProblem",
    "TooLarge",
    "WrongSide",
    "__version__",
]
