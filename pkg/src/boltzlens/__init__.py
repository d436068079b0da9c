"""CNN training engine with Boltzmann-distribution instrumentation of hidden layers."""

__version__ = "0.1.0"
