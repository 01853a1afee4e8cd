"""Reconstruct error propagation paths from wrapped error logs."""

__version__ = "0.1.0"
