"""Regularity indices, exact Gaussian field simulation and Hölder exponent
estimation for stochastic heat and wave equations driven by Lévy generators."""

__version__ = "0.1.0"
