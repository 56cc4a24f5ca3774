"""Exception types raised across the package."""


class HPNNError(Exception):
    """Base class for all library errors."""


class GeometryMismatch(HPNNError, ValueError):
    pass


class ShapeMismatch(HPNNError, ValueError):
    pass


class TargetOutOfRange(HPNNError, ValueError):
    pass


class EmptyDataset(HPNNError, ValueError):
    pass


class LabelOutOfRange(HPNNError, ValueError):
    pass


class TooManyParameters(HPNNError, ValueError):
    pass


class DataError(HPNNError):
    """Problems with input files or dataset contents."""


class ParseError(DataError, ValueError):
    pass


class UnknownLabel(DataError, ValueError):
    pass


class DuplicatePath(DataError, ValueError):
    pass


class BadMagic(DataError, ValueError):
    pass


class UnsupportedMaxval(DataError, ValueError):
    pass


class TruncatedPayload(DataError, ValueError):
    pass


class TooFewSubjects(DataError, ValueError):
    pass


class WrongFoldCount(DataError, ValueError):
    pass


class FilterTooLarge(DataError, ValueError):
    pass
