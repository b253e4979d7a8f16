"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class AbcError(Exception):
    code = "abc-error"

    def __init__(self, message: str = "", code: str | None = None):
        if code is not None:
            self.code = code
        super().__init__(f"{self.code}: {message}" if message else self.code)


class EmptySampleError(AbcError, ValueError):
    code = "empty-sample"


class BadProbabilityError(AbcError, ValueError):
    code = "bad-probability"


class InsufficientDataError(AbcError, ValueError):
    code = "insufficient-data"


class SingularMatrixError(AbcError, ArithmeticError):
    """Raised when a matrix stays singular after the ridge policy."""

    code = "singular-design"


class DegenerateSpreadError(AbcError, ArithmeticError):
    code = "degenerate-spread"


class NonpositiveDofError(AbcError, ValueError):
    code = "nonpositive-dof"


class SimulationError(AbcError, RuntimeError):
    code = "simulation-failure"


class DataFormatError(AbcError, ValueError):
    code = "bad-data"
