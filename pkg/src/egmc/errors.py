"""Exception types shared across the toolkit."""


class EgmcError(Exception):
    """Base class for toolkit-specific failures."""


class ConfigError(EgmcError):
    """Invalid or inconsistent run/experiment configuration."""


class CalibrationError(EgmcError):
    """Calibration could not produce a usable fit."""


class UndefinedStatisticError(EgmcError):
    """A requested statistic is undefined for the given inputs."""
