"""copula-wavelet - rank-based linear wavelet estimation of copula densities."""

__version__ = "0.1.0"
