"""Numerical services: spectral functions, mode solvers, tensor split and cosmology."""
