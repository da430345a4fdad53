"""Covering relations with dropped exit directions, and the model systems they certify."""

__version__ = "0.1.0"
