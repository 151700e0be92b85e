"""Finite-volume laboratory for the Westervelt equation with q-Laplace damping."""

__version__ = "0.1.0"
