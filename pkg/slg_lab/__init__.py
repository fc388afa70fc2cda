"""Stochastic Laplacian growth simulator and martingale verification lab."""

__version__ = "0.1.0"
