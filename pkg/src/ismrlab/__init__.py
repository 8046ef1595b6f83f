"""Simulators and bound checkers for modular-residue relation problems and constant-depth circuits."""

from .core import (
    DitString,
    InputDistribution,
    IsmrError,
    IsmrInstance,
    correlation,
    ismr_residue,
    ismr_verify,
)

__all__ = [
    "DitString",
    "InputDistribution",
    "IsmrError",
    "IsmrInstance",
    "correlation",
    "ismr_residue",
    "ismr_verify",
]
__version__ = "0.1.0"
