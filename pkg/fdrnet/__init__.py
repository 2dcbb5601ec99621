"""Desk-scale scene text detector with cross-level attention and feature decomposition-reconstruction."""

__version__ = "0.1.0"
