"""Numerical laboratory for free and magnetic L^p Hardy inequalities."""

__version__ = "0.1.0"
