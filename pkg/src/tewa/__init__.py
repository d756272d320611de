"""Threat evaluation and weapon assignment for automated air defense."""

__version__ = "0.1.0"
