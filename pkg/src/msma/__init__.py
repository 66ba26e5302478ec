"""Multi-scale manifold alignment toolkit for layerwise representations."""

__version__ = "0.1.0"
