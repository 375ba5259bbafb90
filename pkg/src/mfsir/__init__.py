"""mfsir: spatial stochastic SIR with mean-field interactions.

An N-particle jump-diffusion simulator, a finite-volume solver for its
mean-field limit, and a statistical laboratory that verifies the law of
large numbers rates and the fluctuation central limit theorem at desk scale.
"""
from .backends import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
