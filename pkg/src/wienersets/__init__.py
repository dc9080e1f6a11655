"""Stationary local random countable sets over Wiener noise: simulation and checks."""

__version__ = "0.1.0"
