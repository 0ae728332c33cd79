"""Geometric and material G-structures for continuous distributions of defects."""

__version__ = "0.1.0"
