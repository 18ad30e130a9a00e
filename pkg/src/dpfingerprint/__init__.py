"""Differentially private fingerprinting of categorical relational tables."""

__version__ = "0.1.0"
