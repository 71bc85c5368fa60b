"""Spiking looming-detector network, event-stream synthesis, and optimizers."""

__version__ = "0.1.0"
