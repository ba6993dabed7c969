"""Compute-aware reinforcement learning on toy environments."""

__version__ = "0.1.0"
