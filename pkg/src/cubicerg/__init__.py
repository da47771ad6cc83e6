"""Cubic ergodic averages, Host-Kra factor projections and Wiener-Wintner averages
over concrete dynamical systems."""

__version__ = "0.1.0"
