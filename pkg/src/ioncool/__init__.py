"""Sideband cooling of two trapped ions."""

__version__ = "0.1.0"
