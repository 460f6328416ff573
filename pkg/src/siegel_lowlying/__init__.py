"""Numerical workbench for the geometric side of the degree-two Petersson formula and
the weighted one-level densities of spin and standard L-functions built on it."""

__version__ = "0.1.0"
