"""Coupled dynamical-percolation interface simulator and measurement lab."""

__version__ = "0.1.0"
