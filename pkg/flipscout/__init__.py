"""Flip Scout - pairwise maximum-entropy models of collective trend reversals."""

__version__ = "0.1.0"
