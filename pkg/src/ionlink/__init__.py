"""Simulator for heralded ion-ion entanglement over hybrid photonic links."""

from __future__ import annotations

from .baselines import direct_double_click, direct_single_click, ion_swap
from .core import (
    BipartiteIonState,
    DualRailState,
    EmissionSettings,
    HardwareParams,
    NullStateError,
    PerturbationBreakdownError,
    SingleRailState,
    bell_fidelity,
    normalize,
)
from .optimize import TargetUnreachableError, grid_search, optimize
from .pipeline import ProtocolResult, evaluate
from .purify import purify

__all__ = [
    "BipartiteIonState",
    "DualRailState",
    "EmissionSettings",
    "HardwareParams",
    "NullStateError",
    "PerturbationBreakdownError",
    "ProtocolResult",
    "SingleRailState",
    "TargetUnreachableError",
    "bell_fidelity",
    "direct_double_click",
    "direct_single_click",
    "evaluate",
    "grid_search",
    "ion_swap",
    "normalize",
    "optimize",
    "purify",
]

__version__ = "0.1.0"
