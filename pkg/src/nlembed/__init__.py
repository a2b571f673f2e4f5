"""Nonlinear embeddings learned from pairwise constraints."""

__version__ = "0.1.0"
