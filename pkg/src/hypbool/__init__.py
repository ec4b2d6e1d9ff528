"""Boolean models with ball grains in hyperbolic space."""

from __future__ import annotations

from .process import ModelParams, RadiusDistribution, Realization, sample_realization

__all__ = ["ModelParams", "RadiusDistribution", "Realization", "sample_realization"]
__version__ = "0.1.0"
