"""Sparse random projection ensembles and the tools to check them."""

from .ensembles import (
    PRESETS,
    EnsembleFamily,
    EnsembleKind,
    EnsembleSpec,
    ProjectionMatrix,
    build_matrix,
    project,
    project_batch,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "PRESETS",
    "EnsembleFamily",
    "EnsembleKind",
    "EnsembleSpec",
    "ProjectionMatrix",
    "build_matrix",
    "project",
    "project_batch",
    "__version__",
]
