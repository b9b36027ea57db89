"""Numerical checks for the area functional of two-dimensional graphs in any codimension."""

__version__ = "0.1.0"
