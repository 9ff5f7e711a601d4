"""Exact averaging toolkit for fibered Poisson and Dirac structures."""

__version__ = "0.1.0"
