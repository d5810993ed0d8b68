"""Toolkit for maximally monotone operators on R^n: Fitzpatrick functions
in closed form, epsilon-enlargements, non-enlargeability certificates and
sum theorems checked numerically with exactness witnesses."""

__version__ = "0.1.0"
