"""Warped-product metrics, spline gluing, and positivity certificates."""

__version__ = "0.1.0"
