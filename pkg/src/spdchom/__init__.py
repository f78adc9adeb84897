"""Stochastic Wigner simulation of multimode SPDC and spatio-temporal HOM interference."""

__version__ = "0.1.0"
