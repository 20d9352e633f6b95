"""Numerical laboratory for periodic NLS with quadratic nonlinearity |u|^2."""

__version__ = "0.1.0"
