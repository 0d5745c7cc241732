"""Numerical laboratory for multivariate CLT rates in Wasserstein distance."""

__version__ = "0.1.0"
