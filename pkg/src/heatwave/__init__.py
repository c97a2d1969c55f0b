"""Numerical laboratory for localization of the stochastic heat equation on intervals."""
