"""Exception hierarchy shared across the pipeline."""


class FdaasError(Exception):
    """Base class for all package errors."""


class MalformedRecord(FdaasError, ValueError):
    def __init__(self, line_no: int, reason: str = "") -> None:
        self.line_no = line_no
        super().__init__(f"malformed record at line {line_no}" + (f": {reason}" if reason else ""))


class NonMonotonicTimestamps(FdaasError, ValueError):
    def __init__(self, hse_id: str) -> None:
        self.hse_id = hse_id
        super().__init__(f"timestamps of event {hse_id!r} are not strictly increasing at 1 s spacing")


class InvalidCategory(FdaasError, ValueError):
    def __init__(self, value) -> None:
        self.value = value
        super().__init__(f"physiological state must be in 0..4, got {value!r}")


class UnknownCode(FdaasError, KeyError):
    pass


class InsufficientContext(FdaasError, ValueError):
    pass


class EmptyTrainingSet(FdaasError, ValueError):
    pass


class MissingClass(FdaasError, ValueError):
    pass


class ZeroCount(FdaasError, ValueError):
    pass


class TooFewMinority(FdaasError, ValueError):
    pass


class InsufficientFalls(FdaasError, ValueError):
    pass


class DivergedTraining(FdaasError, RuntimeError):
    pass


class UnknownArchitecture(FdaasError, ValueError):
    pass


class ShapeMismatch(FdaasError, ValueError):
    pass


class StatsMismatch(FdaasError, ValueError):
    pass


class CorruptArtifact(FdaasError, ValueError):
    pass


class VersionMismatch(FdaasError, ValueError):
    pass


class UndefinedMetric(FdaasError, ArithmeticError):
    pass


class LengthMismatch(FdaasError, ValueError):
    pass


class EmptySet(FdaasError, ValueError):
    pass


class ZeroVector(FdaasError, ValueError):
    pass


class TooFewPoints(FdaasError, ValueError):
    pass


class UnknownResident(FdaasError, KeyError):
    pass


class SinkUnavailable(FdaasError, RuntimeError):
    pass


class MissingArtifact(FdaasError, FileNotFoundError):
    pass


class ConfigInvalid(FdaasError, ValueError):
    pass
