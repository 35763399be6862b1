"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` used by the CLI when
emitting error JSON.
"""


class QCondError(Exception):
    """Base class for package errors."""

    code = "error"
    module = "qcond"


class EmptySubspace(QCondError):
    """A partition side that must be nonempty came out empty."""

    code = "empty_subspace"
    module = "configspace"


class TooLarge(QCondError):
    """A request exceeded the enumeration or dense-matrix size limit."""

    code = "too_large"
    module = "configspace"


class InvalidBeta(QCondError):
    """Inverse temperature must be strictly positive."""

    code = "invalid_beta"
    module = "exactthermo"


class SignProblem(QCondError):
    """The Hamiltonian leaves the sign-problem-free class (positive
    off-diagonal element, i.e. gamma < 0 for the single-flip hopping)."""

    code = "sign_problem"
    module = "configspace"


class WrongSide(QCondError):
    """A starting configuration lies in the wrong subspace for the
    requested constrained estimator."""

    code = "wrong_side"
    module = "eprmc"


class NoBracket(QCondError):
    """Root bracketing failed: no sign change on the search interval."""

    code = "no_bracket"
    module = "phasediagram"


class NonConvergence(QCondError):
    """An iterative solver exhausted its iteration budget."""

    code = "non_convergence"
    module = "phasediagram"


class OutOfRange(QCondError):
    """An index or parameter lies outside its documented range."""

    code = "out_of_range"
    module = "models"


class BoundViolation(QCondError):
    """An exact inequality failed beyond numerical tolerance.

    This signals an implementation bug, not physics: only the exact sides
    of the inequality suite raise it.  ``config`` is the offending
    configuration (bit pattern) when one exists.
    """

    code = "bound_violation"
    module = "exactthermo"

    def __init__(self, message, config=None, value=None, bound=None):
        super().__init__(message)
        self.config = config
        self.value = value
        self.bound = bound
