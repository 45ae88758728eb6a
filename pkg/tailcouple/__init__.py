"""Coupled risk measures for heavy-tailed losses."""

__version__ = "1.0.0"
