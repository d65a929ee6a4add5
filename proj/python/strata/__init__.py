"""Streaming hierarchical activity recognition from 9-channel IMU streams."""

from ._strata import *  # noqa: F401,F403
from ._strata import (  # noqa: F401
    ArgumentError,
    CompatibilityError,
    ConflictError,
    DataError,
    FormatError,
    IoError,
    ParseError,
    Snapshot,
    StateError,
    StrataError,
    TrainingError,
    VoteBuffer,
)

__all__ = [name for name in dir() if not name.startswith("_")]
