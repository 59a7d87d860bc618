from enum import IntEnum


class ExitCode(IntEnum):
    success = 0
    failure = 1
    validation = 2
    budget = 3


class DlabError(Exception):
    """Root of every error raised by the library."""


class DlabValidationError(DlabError):
    """Input rejected before or during an operation; the CLI maps it to exit code 2."""


class NonPrime(DlabValidationError):
    pass


class UnsupportedRealDim(DlabValidationError):
    pass


class ReduciblePoly(DlabValidationError):
    pass


class DivisionByNegligible(DlabValidationError):
    pass


class ScaleOutOfRange(DlabValidationError):
    pass


class OutOfBall(DlabValidationError):
    pass


class EmptyInput(DlabValidationError):
    pass


class AlgebraMismatch(DlabValidationError):
    pass


class ScaleMismatch(DlabValidationError):
    pass


class NoAdmissiblePairs(DlabValidationError):
    pass


class SingularMap(DlabValidationError):
    pass


class SubAlgebraTrapped(DlabValidationError):
    def __init__(self, message: str, span: list[list[int]] | None = None) -> None:
        super().__init__(message)
        self.span = span or []


class NotRealBase(DlabValidationError):
    pass


class EmptyGraph(DlabValidationError):
    pass


class RangeError(DlabValidationError):
    pass


class GenerationFailed(DlabValidationError):
    pass


class TrappedInput(DlabValidationError):
    pass


class ConfigurationError(DlabValidationError):
    pass


class FileFormatError(DlabValidationError):
    pass


class BudgetExceeded(DlabError):
    """
    Raised when an operation would exceed the configured point or count budget.

    ### Parameters
    ``message`` -- one line diagnostic
    ``partial`` -- sizes reached before the budget ran out, keyed by stage name
    """
    def __init__(self, message: str, partial: dict[str, int] | None = None) -> None:
        super().__init__(message)
        self.partial = dict(partial or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.partial:
            return base
        sizes = ", ".join(f"{key}={value}" for key, value in self.partial.items())
        return f"{base} (partial sizes: {sizes})"
