"""Variational integrator for rotating shallow water on periodic triangular meshes."""
__version__ = "0.1.0"
