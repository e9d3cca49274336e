"""Exception types raised across the package."""


class SonotrapError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SonotrapError, ValueError):
    """A parameter violates an operation's precondition."""


class LayoutInfeasibleError(SonotrapError):
    """Transducer placement is geometrically impossible (overlapping apertures)."""


class AdcChannelLimitError(SonotrapError):
    """More receivers requested than the 2-channel ADC can sample."""


class SensorRangeError(SonotrapError, ValueError):
    """Temperature outside the sensor's operating range."""


class SensorIOError(SonotrapError):
    """Temperature source failed to deliver a reading."""


class OutOfVolumeError(SonotrapError, ValueError):
    """Focal target outside the layout's working volume."""


class FrameShapeError(SonotrapError, ValueError):
    """Phase frame channel count does not match the register file."""


class NoEdgesError(SonotrapError):
    """Waveform has no transitions; phase is undefined."""


class SingularityError(SonotrapError):
    """Field or potential evaluated too close to a source center."""


class SliceTooSmallError(SonotrapError):
    """Scan window does not contain the requested level crossing."""


class UnstablePlanError(SonotrapError, ValueError):
    """Trajectory step size too large for the trap to follow."""


class NoReceiverError(SonotrapError):
    """Layout has no receiver channels to sample."""


class SessionVersionError(SonotrapError):
    """Persisted session file has an unsupported schema version."""

    def __init__(self, expected, found):
        super().__init__(f"unsupported session version: expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class SessionLoadError(SonotrapError):
    """Persisted session file is corrupt; no partial state was applied."""
