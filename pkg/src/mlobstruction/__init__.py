"""Removal ML degrees and Euler obstructions of very affine varieties."""

from .obstruction import (
    RemovalRecord,
    WitnessCollection,
    compute_collection,
    cross_check,
    euler_obstruction,
    load_collection,
    removal_ml_degrees,
    save_collection,
)
from .systems import VarietySpec

__all__ = [
    "RemovalRecord",
    "VarietySpec",
    "WitnessCollection",
    "compute_collection",
    "cross_check",
    "euler_obstruction",
    "load_collection",
    "removal_ml_degrees",
    "save_collection",
]
__version__ = "0.1.0"
