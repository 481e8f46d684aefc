"""Discrete-time quantum walks: bands, invariants, bound and edge states."""

__version__ = "0.1.0"
