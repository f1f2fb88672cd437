"""Theta-functional Schlesinger machinery on the sphere and the torus."""

__version__ = "0.1.0"
