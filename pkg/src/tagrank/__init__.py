"""Personalized tag ranking learned from the order of a user's past tags."""

__version__ = "0.1.0"
