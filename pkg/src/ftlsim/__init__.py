"""Deterministic SSD simulator with pluggable FTL mapping schemes."""

__version__ = "0.1.0"
