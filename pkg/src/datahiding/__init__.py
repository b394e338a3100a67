"""Numerical tools for quantum data hiding over broadcast channels."""

from . import bounds, channels, codes, measurements, qlin, security
from .errors import (
    ChannelFormatError,
    DataHidingError,
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    NotAStateError,
    ResourceGuardError,
)

__version__ = "0.1.0"

__all__ = [
    "bounds", "channels", "codes", "measurements", "qlin", "security",
    "ChannelFormatError", "DataHidingError", "DimensionMismatchError", "InvalidDimensionError",
    "InvalidParameterError", "NotAStateError", "ResourceGuardError",
]
