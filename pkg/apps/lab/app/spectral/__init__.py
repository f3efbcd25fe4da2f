from app.spectral.basis import (
    EigenBasis,
    EigenspaceProjection,
    build_basis,
    coefficients,
    eigenbasis,
    eigenspace_projection,
    group_eigenvalues,
    reconstruct_constant,
)
from app.spectral.eigensolvers import (
    DenseEigenSolver,
    EigenSolver,
    ShiftInvertEigenSolver,
    select_eigensolver,
    solve_pencil,
)
from app.spectral.io import write_eigenbasis
from app.spectral.truncation import Truncation, truncation_index

__all__ = [
    "DenseEigenSolver",
    "EigenBasis",
    "EigenSolver",
    "EigenspaceProjection",
    "ShiftInvertEigenSolver",
    "Truncation",
    "build_basis",
    "coefficients",
    "eigenbasis",
    "eigenspace_projection",
    "group_eigenvalues",
    "reconstruct_constant",
    "select_eigensolver",
    "solve_pencil",
    "truncation_index",
    "write_eigenbasis",
]
