"""Boundary metric deformations and numerical curvature-condition checks."""

__version__ = "0.1.0"
