"""Transmission eigenvalues of Maxwell equations in radially stratified balls."""

__version__ = "0.1.0"
