"""Simulation and theory for a dynamic network on a birth-death population."""

from .core import (Constant, Discrete, Exponential, InfiniteMoment, InvalidParams, LogNormal,
                   ModelParams, NegativeRate, NonConvergence, Pareto, RngStream,
                   SocialIndexDistribution, SubcriticalPopulation, TwoPoint, Version,
                   ZeroGamma, parse_distribution, validate)
from .snapshot import Snapshot, read_snapshot, write_snapshot

__all__ = [
    "Constant", "Discrete", "Exponential", "InfiniteMoment", "InvalidParams", "LogNormal",
    "ModelParams", "NegativeRate", "NonConvergence", "Pareto", "RngStream",
    "SocialIndexDistribution", "SubcriticalPopulation", "TwoPoint", "Version", "ZeroGamma",
    "parse_distribution", "validate", "Snapshot", "read_snapshot", "write_snapshot",
]
__version__ = "0.1.0"
