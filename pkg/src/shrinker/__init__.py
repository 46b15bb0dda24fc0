"""Numerical construction kit for mean-curvature self-shrinkers."""

__version__ = "0.1.0"
