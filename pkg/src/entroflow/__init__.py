"""Numerical laboratory for entropy and foliation growth of partially hyperbolic flows."""

__version__ = "0.1.0"
