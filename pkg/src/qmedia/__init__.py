"""Hydrodynamic model of quantum media: dispersion analysis and a pseudospectral
solver for the nonlocal nonlinear Schrödinger equation."""

__version__ = "0.1.0"
