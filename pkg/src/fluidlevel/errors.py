"""Exception types raised across the measurement pipeline."""


class FluidLevelError(Exception):
    """Base class for all package errors."""


# optics
class TotalInternalReflection(FluidLevelError, ValueError):
    pass


class InvalidAngle(FluidLevelError, ValueError):
    pass


class OutOfRange(FluidLevelError, ValueError):
    pass


class DegenerateProjection(FluidLevelError, ValueError):
    pass


# vision
class DegenerateImage(FluidLevelError, ValueError):
    pass


class NoContour(FluidLevelError):
    pass


class InsufficientPoints(FluidLevelError, ValueError):
    pass


class DegenerateConic(FluidLevelError, ValueError):
    pass


# stabilize
class NonFiniteInput(FluidLevelError, ValueError):
    pass


# calibrate
class DegeneratePoints(FluidLevelError, ValueError):
    pass


class RankDeficient(FluidLevelError, ValueError):
    pass


class RegionNotCovered(FluidLevelError, ValueError):
    pass


class NotMonotone(FluidLevelError, ValueError):
    pass


class ModelFormatError(FluidLevelError, ValueError):
    """Calibration JSON document does not match the persisted schema."""


# ingest
class BadMagic(FluidLevelError, ValueError):
    pass


class MalformedHeader(FluidLevelError, ValueError):
    pass


class UnsupportedMaxval(FluidLevelError, ValueError):
    pass


class TruncatedRaster(FluidLevelError, ValueError):
    pass


class UnsupportedFormat(FluidLevelError, ValueError):
    pass


class CorruptImage(FluidLevelError, ValueError):
    pass


class NoMatches(FluidLevelError):
    pass


class FrameDecodeError(FluidLevelError):
    """A file in a directory source could not be decoded."""

    def __init__(self, path, cause):
        super().__init__(f"{path}: {cause}")
        self.path = path
        self.cause = cause


class ConnectError(FluidLevelError):
    pass


class NotMultipart(FluidLevelError):
    pass


class ProtocolError(FluidLevelError):
    pass


class TruncatedFrame(FluidLevelError):
    pass
