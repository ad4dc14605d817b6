"""Exception hierarchy shared by all ALIP modules."""


class AlipError(Exception):
    """Base class for every error raised by this package."""


class ModelError(AlipError, ValueError):
    pass


class EmptyModel(ModelError):
    pass


class NonPositiveRating(ModelError):
    pass


class BoundViolation(ModelError):
    """Transient bounds do not bracket the steady rating."""


class NoReachableState(ModelError):
    """A state transition diagram leaves an appliance with nowhere to go."""


class ModelFileError(ModelError):
    """Raised while parsing a model or scenario file; message cites line and field."""


class LengthMismatch(AlipError, ValueError):
    pass


class Infeasible(AlipError):
    pass


class SearchSpaceTooLarge(AlipError):
    pass


class EmptyProblem(AlipError, ValueError):
    pass


class ZeroGroundTruth(AlipError, ValueError):
    pass


class ParseError(AlipError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingColumn(AlipError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing column"


class InvalidScenario(AlipError, ValueError):
    pass


class TimestepError(AlipError):
    """Wraps a solver failure with the timestep at which it occurred."""

    def __init__(self, k, cause):
        super().__init__(f"timestep {k}: {cause}")
        self.k = k
        self.cause = cause
