"""Pseudo-spectral toolkit for the mixed fractional nonlinear Schrodinger equation."""
