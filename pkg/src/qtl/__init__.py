"""Hybrid quantum-classical classifiers with effective-dimension analysis."""

__version__ = "0.1.0"
