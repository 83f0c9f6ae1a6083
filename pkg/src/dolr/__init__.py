"""Distributed online linear regression over strongly connected networks."""

__version__ = "0.1.0"
