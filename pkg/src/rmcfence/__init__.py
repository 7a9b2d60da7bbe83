"""Barrier placement and dependency-use optimization for constraint-annotated CFGs."""

__version__ = "0.1.0"
