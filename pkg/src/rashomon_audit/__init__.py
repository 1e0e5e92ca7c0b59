"""Predictive-multiplicity audits for class-balancing methods."""

__version__ = "0.1.0"
