"""Exception hierarchy shared by all modules."""


class DKFError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DKFError):
    """A configuration or argument violates a documented constraint."""


class ParseError(ValidationError):
    """A scenario file could not be read into a configuration."""


class NoEdges(ValidationError):
    pass


class StepSizeTooLarge(ValidationError):
    pass


class WrongLength(ValueError, DKFError):
    pass


class NoRootAtOne(ValueError, DKFError):
    pass


class ZeroVector(ValueError, DKFError):
    pass


class NumericalError(DKFError):
    """Base class for failures caused by the numbers rather than the inputs."""


class SingularCovariance(NumericalError):
    pass


class DegenerateKernel(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class PropertyViolation(NumericalError):
    pass


class NeverConverged(NumericalError):
    pass
