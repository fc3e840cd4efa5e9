"""Quasi-flat matrix models of quantum permutation groups."""

__version__ = "0.1.0"
