"""Anchor-protected, gated iterative code refinement."""

__version__ = "0.1.0"
