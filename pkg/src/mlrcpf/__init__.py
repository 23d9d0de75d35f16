"""Multi-layer robust crop planning: spatial admissibility, rotation dynamics
with neighbour interactions, and Wasserstein-robust scenario evaluation."""

from .model import (
    AgronomicState,
    Crop,
    CropCategory,
    InteractionMatrix,
    LandType,
    LandUnit,
    Plan,
    PlanningInstance,
    validate_instance,
)

__version__ = "0.1.0"

__all__ = [
    "AgronomicState", "Crop", "CropCategory", "InteractionMatrix", "LandType", "LandUnit",
    "Plan", "PlanningInstance", "validate_instance",
]
