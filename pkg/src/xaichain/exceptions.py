"""Exception hierarchy shared across the package."""


class XAIChainError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(XAIChainError, ValueError):
    pass


class DataFormatError(XAIChainError, ValueError):
    pass


class TrainingDegenerateError(XAIChainError, ValueError):
    pass


class NumericalFailureError(XAIChainError, ArithmeticError):
    pass


class SearchSpaceTooLargeError(XAIChainError, ValueError):
    """Raised by exhaustive search when the enumeration exceeds its cap."""

    def __init__(self, estimate, cap):
        super().__init__(f"search space of {estimate} evaluations exceeds cap {cap}")
        self.estimate = estimate
        self.cap = cap


class RenderError(XAIChainError, KeyError):
    def __init__(self, symbol, message=None):
        super().__init__(message or f"cannot resolve {symbol!r}")
        self.symbol = symbol

    def __str__(self):
        return self.args[0]


class ConfigurationError(XAIChainError, ValueError):
    pass


class GatewayError(XAIChainError):
    pass


class TransportError(GatewayError):
    pass


class ProtocolError(GatewayError):
    pass


class EmptyResponseError(GatewayError):
    pass


class StageError(XAIChainError):
    """A chain stage failed; ``stage`` names which one."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class VerdictParseError(XAIChainError, ValueError):
    def __init__(self, message, raw):
        super().__init__(message)
        self.raw = raw
