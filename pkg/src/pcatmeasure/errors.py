"""Exception hierarchy.

Every pipeline failure carries a stable ``error_class`` string so the CLI and
batch reports can classify cases without parsing messages.
"""

from __future__ import annotations


class PcatError(Exception):
    error_class = "pcat-error"


class VolumeIOError(PcatError):
    error_class = "io-error"


class GeometryMismatchError(PcatError, ValueError):
    error_class = "geometry-mismatch"


class SplitFailedError(PcatError):
    error_class = "split-failed"


class NoBifurcationError(PcatError):
    error_class = "no-bifurcation"


class ShortCenterlineError(PcatError):
    error_class = "short-centerline"


class ConfigError(PcatError, ValueError):
    error_class = "config-invalid"
