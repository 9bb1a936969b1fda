"""Distributed momentum-based Frank-Wolfe for stochastic optimization over agent networks."""

__version__ = "0.1.0"

from .core import DMFW, AgentState, DivergenceError, iterate
from .lmo import ConstraintSet, lmo, membership
from .schedules import Rate, StepSchedule
from .topology import Graph, MixingMatrix, consensus_round, metropolis_weights

__all__ = [
    "DMFW",
    "AgentState",
    "ConstraintSet",
    "DivergenceError",
    "Graph",
    "MixingMatrix",
    "Rate",
    "StepSchedule",
    "consensus_round",
    "iterate",
    "lmo",
    "membership",
    "metropolis_weights",
]
