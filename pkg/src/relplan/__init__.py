"""Dependency-aware software release planning."""

__version__ = "0.1.0"
