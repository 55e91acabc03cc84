"""Exceptions raised by copula-wavelet."""


class CopulaWaveletError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CopulaWaveletError, ValueError):
    """A configuration file or option failed validation."""


class InvalidFilterError(CopulaWaveletError, ValueError):
    """A refinement filter does not define a scaling function."""


class TieError(CopulaWaveletError, ValueError):
    """Tied observations were found while the tie policy is 'reject'."""


class UnboundedDensityError(CopulaWaveletError, ValueError):
    """The copula density has no finite supremum on the open cube."""


class QuadratureError(CopulaWaveletError, RuntimeError):
    """Adaptive quadrature hit its depth limit before converging."""
