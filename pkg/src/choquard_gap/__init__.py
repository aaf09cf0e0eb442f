"""Periodic Choquard equations with a spectral gap: spectral discretization,
Bloch analysis, Newton-Krylov solver and bifurcation diagnostics."""

__version__ = "0.1.0"
