"""Explicit low-rank separable forms of RBF kernels and spectral diagnostics."""

__version__ = "0.1.0"
