"""Exception hierarchy shared by the solvers and the CLI."""


class USRDError(Exception):
    """Base class for all package errors."""


class ModelError(USRDError, ValueError):
    """A source model failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ZeroMassSymbol(ModelError):
    pass


class NegativeDistortion(ModelError):
    pass


class EmptyRecoverySet(ModelError):
    pass


class InconsistentAlphabet(ModelError):
    pass


class MalformedModel(ModelError):
    pass


class DimensionMismatch(USRDError, ValueError):
    pass


class InfeasibleDelta(USRDError, ValueError):
    """Requested distortion is below the smallest achievable one."""


class Infeasible(InfeasibleDelta):
    """No test channel meets every constraint of a multi-constraint problem."""


class DeltaOutOfRange(InfeasibleDelta):
    pass


class TooLarge(USRDError, ValueError):
    pass


class TooManySamplers(TooLarge):
    pass


class NoFeasibleSet(USRDError, ValueError):
    pass


class UnknownTau(USRDError, KeyError):
    pass


class SignalingImpossible(USRDError, ValueError):
    pass
