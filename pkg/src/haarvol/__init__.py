"""Simulation of stochastic-volatility log-prices driven by a Gaussian process via Haar multiresolution."""

__version__ = "0.1.0"
