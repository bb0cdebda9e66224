"""Complex-order spherical maximal functions: exponents, multipliers and scaling experiments."""

__version__ = "0.1.0"
