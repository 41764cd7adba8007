"""Behavioural forma mentis networks from free-association data."""

__version__ = "0.1.0"
