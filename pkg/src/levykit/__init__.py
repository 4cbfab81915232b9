"""Numerical toolkit for Levy-type generators, their function spaces and parabolic equations."""

__version__ = "0.1.0"
