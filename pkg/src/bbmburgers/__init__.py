"""Spectral solver and verification suite for the BBM-Burgers equation on [0, 1]."""

__version__ = "0.1.0"
