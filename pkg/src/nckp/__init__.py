"""Symbolic and numeric workbench for Moyal-deformed KP/KdV integrable systems."""

__version__ = "0.1.0"
