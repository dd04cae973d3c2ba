"""Collaborative web-archive collection curation platform."""

__version__ = "0.1.0"
