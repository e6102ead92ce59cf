"""Simulation and analysis toolkit for a nanofiber-coupled optical tweezer array."""

__version__ = "0.1.0"
