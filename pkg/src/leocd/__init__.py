"""Change-detection-driven downlink simulation for LEO Earth observation."""

from .errors import ConfigError, DataError, LeocdError, LinkOutageError
from .raster import BandStack, BinaryMap, ScoreMap

__version__ = "0.1.0"

__all__ = [
    "BandStack",
    "BinaryMap",
    "ScoreMap",
    "ConfigError",
    "DataError",
    "LeocdError",
    "LinkOutageError",
]
