"""Exception types raised across the package."""


class BikeError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVector(BikeError, ValueError):
    pass


class DimMismatch(BikeError, ValueError):
    pass


class LengthMismatch(BikeError, ValueError):
    pass


class NonPositiveTemperature(BikeError, ValueError):
    pass


class NonFiniteInput(BikeError, ValueError):
    pass


# file formats and manifests
class BembError(BikeError):
    pass


class BadMagic(BembError):
    pass


class BadVersion(BembError):
    pass


class TruncatedFile(BembError):
    pass


class TrailingBytes(BembError):
    pass


class DimOverflow(BembError):
    pass


class MissingFile(BikeError, FileNotFoundError):
    pass


class UnknownLabel(BikeError, ValueError):
    pass


class ManifestError(BikeError, ValueError):
    pass


# text
class EmptyText(BikeError, ValueError):
    pass


class EmptyAttributes(BikeError, ValueError):
    pass


class MissingPlaceholder(BikeError, ValueError):
    pass


class BadK(BikeError, ValueError):
    pass


# distributed simulation
class IndivisibleBatch(BikeError, ValueError):
    pass


class InconsistentShardPlan(BikeError, RuntimeError):
    pass


class GatherNotRun(BikeError, RuntimeError):
    pass


# recognition
class LambdaOutOfRange(BikeError, ValueError):
    pass


class EmptyDataset(BikeError, ValueError):
    pass


class TooFewClasses(BikeError, ValueError):
    pass


class DimTooSmall(BikeError, ValueError):
    pass
