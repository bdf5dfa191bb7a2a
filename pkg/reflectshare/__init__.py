"""Indoor spectrum sharing with programmable reflect-arrays."""

__version__ = "0.1.0"
