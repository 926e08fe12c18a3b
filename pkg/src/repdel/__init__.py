"""Simulation engine and mechanism library for repeated delegated choice."""
from .core import (
    EligibleSet,
    History,
    InvalidParameter,
    InvalidProposal,
    Realization,
    RoundRecord,
    SetKind,
    Solution,
    is_eligible,
    round_outcome,
)
from .instances import InstanceModel, fixture
from .kernels import BACKEND
from .engine import AgentSpec, MechanismSpec, SimulationConfig, replicate, run_simulation

__version__ = "0.1.0"

__all__ = [
    "AgentSpec",
    "BACKEND",
    "EligibleSet",
    "History",
    "InstanceModel",
    "InvalidParameter",
    "InvalidProposal",
    "MechanismSpec",
    "Realization",
    "RoundRecord",
    "SetKind",
    "SimulationConfig",
    "Solution",
    "fixture",
    "is_eligible",
    "replicate",
    "round_outcome",
    "run_simulation",
]
