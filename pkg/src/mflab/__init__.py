"""Desk-scale laboratory for bosonic mean-field dynamics and Wigner measures."""

__version__ = "0.1.0"
