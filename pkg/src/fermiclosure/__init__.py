"""Closed correlation dynamics for open fermionic chains.

Even-order Majorana correlation tensors of Lindblad chains with quadratic
Liouvillians, and of quartic Liouvillians that satisfy the closure condition,
checked against a dense exact-diagonalization oracle.
"""
from .model import FermionChainModel, InitialState, build_preset_chain, load_model, validate
from .structure import build_structure, rapid_spectrum

__all__ = [
    "FermionChainModel",
    "InitialState",
    "build_preset_chain",
    "load_model",
    "validate",
    "build_structure",
    "rapid_spectrum",
]

__version__ = "0.1.0"
