"""Exception types shared across the analysis engine."""


class OctopusError(Exception):
    """Base class for all errors raised by this package."""


class OffsetOutOfRange(OctopusError):
    """Z-offset shift exceeds the radial extent of the frames."""


class NoShadowFound(OctopusError):
    """No guidewire shadow with sufficient edge contrast exists."""


class SegmentationFailed(OctopusError):
    """A frame produced no boundary path above the minimal gradient score."""


class SpecInvalid(OctopusError):
    """Phantom specification failed validation.

    `field` carries the dotted path of the offending entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DegenerateTraining(OctopusError):
    """Training set does not contain at least two classes."""


class ModelKindMismatch(OctopusError):
    """A model of the wrong kind was passed to a classification step."""


class InsufficientStruts(OctopusError):
    """Fewer than two struts on a frame; no contour can be interpolated."""


class DegenerateSignal(OctopusError):
    """A thickness signal has zero variance; automatic registration impossible."""


class InvalidLandmarks(OctopusError):
    """Landmark pairs are not ordered consistently between pullbacks."""


class FormatError(OctopusError):
    """Container file violates the bit-exact format.

    `offset` is the byte offset at which the problem was detected, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class VersionMismatch(OctopusError):
    """Container metadata declares an unknown format version."""


class ConfigError(OctopusError):
    """Pipeline configuration is invalid (unknown key or out-of-range value)."""
