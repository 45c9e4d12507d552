"""Exception hierarchy shared by every dnfeq module."""


class DnfError(Exception):
    """Base class for all package errors."""


class InvalidExtent(DnfError, ValueError):
    pass


class TooFewNodes(DnfError, ValueError):
    pass


class DomainMismatch(DnfError, ValueError):
    pass


class NonFiniteKernel(DnfError, ValueError):
    pass


class ModelError(DnfError, ValueError):
    """A model ingredient violates its invariants (tau <= 0, negative gain, ...)."""


class BracketFailure(DnfError, ArithmeticError):
    """The scalar map did not change sign over the bracket; usually a non-monotone activation."""


class ToleranceNotMet(DnfError, ArithmeticError):
    pass


class NonConvergence(DnfError, ArithmeticError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ReferenceUnreachable(DnfError, ValueError):
    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class DivisionDegenerate(DnfError, ArithmeticError):
    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class HistoryUnderflow(DnfError, IndexError):
    pass


class NonFiniteState(DnfError, FloatingPointError):
    """Raised when a trajectory blows up; ``result`` holds the samples recorded so far."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConfigError(DnfError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
