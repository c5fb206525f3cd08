"""Quasi-perfect distance-4 binary codes: doubling constructions, exact
weight spectra, erasure-correction probabilities, and a product-code
memory simulation."""

__version__ = "0.1.0"
