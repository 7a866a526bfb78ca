"""Shared exception types."""


class ProprioError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ProprioError):
    """Tensor or vector shapes do not line up."""


class StateError(ProprioError):
    """Operation invoked in the wrong order (e.g. backward before forward)."""


class ValidationError(ProprioError):
    """Input value violates a documented contract."""


class TrainingError(ProprioError):
    """Training produced a non-finite quantity or otherwise failed."""


class KinematicsError(ProprioError):
    """Requested pose is outside the arm's reachable set."""


class ConfigError(ProprioError):
    """Bad experiment, camera, or geometry configuration."""


class ProtocolError(ProprioError):
    """Violation of the four-way dataset split protocol."""


class CheckpointError(ProprioError):
    """Checkpoint stream is malformed or does not match the receiving model."""
