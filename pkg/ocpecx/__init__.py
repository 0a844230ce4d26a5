"""Ocpecx package."""

__version__ = "Dev"
