"""Netflux - net flux through a random conductor, simulated and audited."""

__version__ = "0.1.0"
