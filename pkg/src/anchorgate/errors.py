"""Exception hierarchy shared across the package."""


class AnchorGateError(Exception):
    """Base class for every error raised by anchorgate."""


class AnalysisMissing(AnchorGateError):
    """A snapshot was queried for severity counts before being analyzed."""


class EmptyChain(AnchorGateError):
    """A chain has no committed iterations to reason about."""


class ParseError(AnchorGateError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class UnsupportedLanguage(AnchorGateError):
    pass


class NotFound(AnchorGateError):
    pass


class ConfigError(AnchorGateError):
    pass


class BackendUnavailable(AnchorGateError):
    """The configured external scanner could not be started."""


class BackendProtocolError(AnchorGateError):
    """The external scanner produced output we could not interpret."""


class ContractViolation(AnchorGateError):
    pass


class GenerationError(AnchorGateError):
    """Base for candidate-production failures; each one consumes an attempt."""


class ScenarioExhausted(GenerationError):
    pass


class ScenarioError(GenerationError):
    """A scripted edit could not be applied to the current program."""


class MalformedCompletion(GenerationError):
    pass


class GenerationUnavailable(GenerationError):
    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class ReviewUnavailable(AnchorGateError):
    pass


class BaselineInvalid(AnchorGateError):
    pass


class UndefinedMetric(AnchorGateError):
    pass


class PairMissing(AnchorGateError):
    pass
