"""Planted-clique experiments: samplers, low-degree advantages, noise chains, and hard-core constructions."""

__version__ = "0.1.0"
