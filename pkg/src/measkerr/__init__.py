"""Measurement-induced Kerr nonlinearity: simulation and quantum Fisher information."""

__version__ = "0.1.0"
