"""Cooperative P2P power trading between nanogrid clusters, with an RL harness."""

__version__ = "0.1.0"
