"""Numerical toolkit for static and current-driven chiral skyrmions."""

__version__ = "0.1.0"
