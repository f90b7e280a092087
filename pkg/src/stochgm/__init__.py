"""Nonstationary stochastic ground-motion simulation and rock-site GMPEs."""

__version__ = "0.1.0"
