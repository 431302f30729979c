"""Pseudo-spectral solver and dyadic-block diagnostics for planar compressible MHD with an out-of-plane field."""

__version__ = "0.1.0"
