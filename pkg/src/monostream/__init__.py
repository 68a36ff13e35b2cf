"""Incremental inference for min/max message-passing GNNs on streaming graphs."""
from monostream.kernels import BACKEND, Aggregator

__version__ = "0.1.0"

__all__ = ["Aggregator", "BACKEND", "__version__"]
