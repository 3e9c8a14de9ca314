"""Exact diagonalization of the half-filled Kondo lattice with Holstein-type phonons.

Builds the model on small lattices, realizes the hole-particle and Lang-Firsov
transformations as matrices, and checks ground-state uniqueness, total spin,
correlation signs and cone positivity numerically.
"""

from .errors import (
    BasisMismatch,
    ConditionViolation,
    DegenerateGroundState,
    DimensionMismatch,
    InsufficientEigenpairs,
    KondoPhononError,
    InvalidTruncation,
    MixedCouplingSigns,
    NoConvergence,
    NotSymmetric,
    SectorEmpty,
    UnsupportedExactTest,
    UnsupportedSize,
)
from .model import (
    ModelSpec,
    ValidatedModel,
    effective_coulomb,
    example_model,
    is_positive_semidefinite,
    predicted_total_spin,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "BasisMismatch",
    "ConditionViolation",
    "DegenerateGroundState",
    "DimensionMismatch",
    "InsufficientEigenpairs",
    "InvalidTruncation",
    "KondoPhononError",
    "MixedCouplingSigns",
    "ModelSpec",
    "NoConvergence",
    "NotSymmetric",
    "SectorEmpty",
    "UnsupportedExactTest",
    "UnsupportedSize",
    "ValidatedModel",
    "effective_coulomb",
    "example_model",
    "is_positive_semidefinite",
    "predicted_total_spin",
    "validate",
]
