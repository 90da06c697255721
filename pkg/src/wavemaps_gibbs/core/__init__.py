"""Grids, fields and the wave kernels shared across the lab's services."""

from .extension import extend_fold, fold_array, restrict, restrict0
from .grid import Field, ModelParams, PhaseState, RadialGrid, is_admissible
from .holder import holder_norm_C0, holder_norm_Cm1
from .variables import from_phi, to_phi
from .wave import dalembert_linear, duhamel

__all__ = [
    "Field",
    "ModelParams",
    "PhaseState",
    "RadialGrid",
    "dalembert_linear",
    "duhamel",
    "extend_fold",
    "fold_array",
    "from_phi",
    "holder_norm_C0",
    "holder_norm_Cm1",
    "is_admissible",
    "restrict",
    "restrict0",
    "to_phi",
]
