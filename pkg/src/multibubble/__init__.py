"""Finite-dimensional mechanics of multi-bubble infinite-time blow-up for the 5D
energy-critical focusing wave equation."""

__version__ = "0.1.0"
