"""Degeneration data from self-similar matrix paths."""

__version__ = "0.1.0"
