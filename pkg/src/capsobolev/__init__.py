"""Weighted spherical cap averages, square functions and Sobolev norms on S^{d-1}."""
__version__ = "0.1.0"
