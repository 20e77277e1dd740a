"""Lung CT preprocessing, gradient boosting, and ensemble evaluation toolkit."""

__version__ = "0.1.0"

from lungprep.backend import active_backend

__all__ = ["active_backend", "__version__"]
