"""FRER and X-FRER reliability modelling for integrated 5G/TSN systems."""

__version__ = "0.1.0"
