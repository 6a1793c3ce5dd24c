"""Diversification methods for OOD generalization on synthetic tasks."""

__version__ = "0.1.0"
