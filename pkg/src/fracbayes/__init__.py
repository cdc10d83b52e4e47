"""Tempered and regular Bayesian posteriors for sparse random-design regression."""

__version__ = "0.1.0"
