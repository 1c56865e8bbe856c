"""Agent-based simulation of an industrial potato commodity market."""

__version__ = "0.1.0"
