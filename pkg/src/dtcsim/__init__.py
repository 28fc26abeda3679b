"""Exact simulation of periodically driven disordered Ising chains (discrete time crystals)."""

__version__ = "0.1.0"
