"""Numerical laboratory for ergodic averages of wave, spectral and Langevin systems."""

__version__ = "0.1.0"
