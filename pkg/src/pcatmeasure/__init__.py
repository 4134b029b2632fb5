"""Pericoronary adipose tissue (PCAT) attenuation and volume from CCTA."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    GeometryMismatchError,
    NoBifurcationError,
    PcatError,
    ShortCenterlineError,
    SplitFailedError,
    VolumeIOError,
)
from .pcat import HuWindow, PcatMeasurement, ProtocolParams, measure_lpcat, measure_rpcat, split_arteries  # noqa: E402
from .volume_io import BinaryMask, VoxelGrid, load_mask, load_volume, save_volume  # noqa: E402

__all__ = [
    "__version__",
    "BinaryMask",
    "ConfigError",
    "GeometryMismatchError",
    "HuWindow",
    "NoBifurcationError",
    "PcatError",
    "PcatMeasurement",
    "ProtocolParams",
    "ShortCenterlineError",
    "SplitFailedError",
    "VolumeIOError",
    "VoxelGrid",
    "load_mask",
    "load_volume",
    "measure_lpcat",
    "measure_rpcat",
    "save_volume",
    "split_arteries",
]
