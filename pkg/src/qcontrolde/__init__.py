"""Noise-resistant and subspace-adaptive differential evolution for quantum control."""

__version__ = "0.1.0"
