"""Constant mean curvature surfaces from a reduced spinor flow."""

__version__ = "0.1.0"
