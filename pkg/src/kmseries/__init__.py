"""Multiprecision verification engine for multidimensional basic and
classical hypergeometric series reductions."""

__version__ = "0.1.0"
