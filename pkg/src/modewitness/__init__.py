"""Simulation and metrological witnesses of mode-intrinsic entanglement."""

__version__ = "0.1.0"
