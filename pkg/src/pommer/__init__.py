"""Deterministic Pommerman team environment with a filtered-PPO agent stack."""

__version__ = "0.1.0"
