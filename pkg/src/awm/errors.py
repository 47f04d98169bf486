"""Exception types shared across the pipeline."""


class AwmError(Exception):
    """Base class for all errors raised by this package."""


# record parsing / ingestion
class MalformedLine(AwmError):
    pass


class MissingField(AwmError):
    pass


class InvalidValue(AwmError):
    pass


class StoreUnavailable(AwmError):
    pass


# SQL digesting
class EmptyInput(AwmError):
    pass


class UnterminatedString(AwmError):
    pass


# embedding
class EmptyQuery(AwmError):
    pass


# feature encoding / classification
class StatsMismatch(AwmError):
    pass


class DimensionMismatch(AwmError):
    pass


class EmptyTrainingSet(AwmError):
    pass


# pattern mining
class EmptySequence(AwmError):
    pass


class UnknownContext(AwmError):
    pass


# schedule optimization
class CycleDetected(AwmError):
    pass


class IndexOutOfRange(AwmError):
    pass


class MissingRt(AwmError):
    pass


# persisted state
class CorruptState(AwmError):
    pass


class VersionMismatch(AwmError):
    pass
