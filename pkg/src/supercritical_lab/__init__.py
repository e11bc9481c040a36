"""Numerical laboratory for least-energy solutions of weighted elliptic
problems at and beyond the higher critical exponent."""

__version__ = "0.1.0"
