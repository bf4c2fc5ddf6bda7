"""Differentiable surrogates of parametric structural dynamics plus
gradient-initialized, neurally-refined inverse parameter estimation."""

from .backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
