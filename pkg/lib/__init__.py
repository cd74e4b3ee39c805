"""Screening-then-allocation policy library."""

__version__ = "0.1.0"
