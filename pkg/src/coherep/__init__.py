"""Population and coherence contributions to entropy production in open quantum systems."""

__version__ = "0.1.0"
