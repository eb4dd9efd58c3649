"""Exception hierarchy shared by every audit module."""


class AuditError(Exception):
    """Base class for all errors raised by clfaudit."""


class NumericsError(AuditError):
    pass


class RankDeficient(NumericsError):
    pass


class LengthMismatch(NumericsError, ValueError):
    pass


class ZeroVector(NumericsError, ValueError):
    pass


class DegenerateSample(NumericsError, ValueError):
    pass


class SampleSizeOutOfRange(NumericsError, ValueError):
    pass


class DataError(AuditError):
    pass


class MissingColumn(DataError):
    pass


class EmptyDataset(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class GroupTooSmall(DataError):
    pass


class TrainingError(AuditError):
    pass


class DidNotConverge(TrainingError):
    def __init__(self, iterations, message=None):
        super().__init__(message or f"did not converge after {iterations} iterations")
        self.iterations = iterations


class PerfectSeparation(TrainingError):
    pass


class SingleGroup(TrainingError):
    pass


class UnknownGroup(AuditError, KeyError):
    pass


class NotApplicable(AuditError):
    """A KPI or operation cannot be computed for this model/data; carries a reason."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class ZeroOutputVariance(NotApplicable):
    pass


class ZeroDenominator(NotApplicable):
    pass


class EmptyGroup(AuditError, ValueError):
    pass


class EmptyCell(NotApplicable):
    pass


class TooManyFeatures(AuditError, ValueError):
    pass


class SpaceMismatch(AuditError, ValueError):
    pass


class EmptyGrid(AuditError):
    pass


class NoValidCandidates(AuditError):
    pass


class UnknownKpi(AuditError, KeyError):
    pass


class DuplicateKpi(AuditError, ValueError):
    pass


class ConfigError(AuditError):
    pass


class InstanceNotFound(AuditError):
    pass


class OneClassOnly(AuditError, ValueError):
    pass
