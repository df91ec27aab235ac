"""
Exception hierarchy for the simulator and data pipeline.
"""

from typing import Any, Optional


class ETrollError(Exception):
    """Base class for all domain errors."""


class ConfigError(ETrollError):
    """Invalid or unreadable run configuration."""


class NoContactError(ETrollError):
    """The object does not touch the finger line within tolerance."""


class GraspLostError(ETrollError):
    """Contact with a finger could not be maintained.

    The partially recorded trace (if any) is attached for diagnostics.
    """

    def __init__(self, message: str, trace: Optional[Any] = None):
        super().__init__(message)
        self.trace = trace


class StepTooLargeError(ETrollError):
    """The no-slip solve did not converge for the requested step."""


class SingularAngleError(ETrollError):
    """Pulling finger angle too close to 0 or pi for the error converter."""


class DegenerateFitError(ETrollError):
    """Calibration readings do not increase with the applied mass."""


class SeriesTooShortError(ETrollError):
    """Channel series is shorter than the smoothing window."""


class ZeroWidthError(ETrollError):
    """Peak end does not come after its start."""


class DegeneratePCAError(ETrollError):
    """Feature matrix has no variance to decompose."""


class InsufficientSamplesError(ETrollError):
    """Too few samples per class for the requested evaluation."""


class SchemaMismatchError(ETrollError):
    """A file does not match the expected schema version or layout."""


class IntegrityError(ETrollError):
    """A dataset file does not match the hash recorded in its manifest."""


class SingularLoadError(ETrollError):
    """Contact distance too small to convert a torque into a force."""


class ContactOffFingerError(GraspLostError):
    """A contact point moved past the end (or the joint) of its finger."""
