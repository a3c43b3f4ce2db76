"""Morphoprot - morphological and fractal comparison of protein structures."""
__version__ = "0.1.0"
