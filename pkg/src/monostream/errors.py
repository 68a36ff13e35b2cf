class MonostreamError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MonostreamError, ValueError):
    pass


class EmptyInputError(MonostreamError, ValueError):
    pass


class NaNError(MonostreamError, ValueError):
    pass


class DuplicateEdge(MonostreamError, KeyError):
    pass


class MissingEdge(MonostreamError, KeyError):
    pass


class StaleDelta(MonostreamError, RuntimeError):
    pass


class ModelParseError(MonostreamError, ValueError):
    pass


class UnsupportedModel(ModelParseError):
    """The model uses an operation that breaks selective aggregation."""


class WeightError(MonostreamError, ValueError):
    pass


class HookError(MonostreamError, KeyError):
    pass


class ContractViolation(MonostreamError, RuntimeError):
    pass


class TensorFormatError(MonostreamError, ValueError):
    pass
