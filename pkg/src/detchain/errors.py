"""Exception types shared across the package."""


class DetchainError(Exception):
    """Base class for all package errors."""


class ZeroNormError(DetchainError):
    """Wavefunction has vanishing norm and cannot be normalized."""


class InvalidShapingError(DetchainError):
    """Pulse shaping parameters are unusable (decay_time <= rise_time)."""


class InoperableDetectorError(DetchainError):
    """A start reaction occurred in a detector flagged inoperable.

    Carries the 1-based detector index so the trial can be logged as a
    dead-channel event instead of crashing the run.
    """

    def __init__(self, detector_index: int):
        super().__init__(f"detector {detector_index} is not operable")
        self.detector_index = detector_index


class ConfigMismatchError(DetchainError):
    """The particle kind cannot produce a start reaction in any detector."""


class MiscalibratedApparatusError(DetchainError):
    """Spin-analyzer windows do not separate the displaced branches."""


class IncompleteLogError(DetchainError):
    """A verification that needs the full event log got a sampled one."""


class ConfigParseError(DetchainError):
    """Config file could not be read or parsed. CLI exit code 2."""


class ConfigValidationError(DetchainError):
    """Config parsed but violates an invariant. CLI exit code 3."""
