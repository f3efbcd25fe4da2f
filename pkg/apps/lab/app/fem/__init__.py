from app.fem.assembly import (
    InterfaceMatrices,
    SystemMatrices,
    assemble,
    interface_matrices,
    write_coordinate,
)
from app.fem.linear import DirectSolver, JacobiCGSolver, LinearSolver, select_solver
from app.fem.poisson import (
    discrete_harmonic_extension,
    harmonic_residual,
    solve_dirichlet_poisson,
)

__all__ = [
    "DirectSolver",
    "InterfaceMatrices",
    "JacobiCGSolver",
    "LinearSolver",
    "SystemMatrices",
    "assemble",
    "discrete_harmonic_extension",
    "harmonic_residual",
    "interface_matrices",
    "select_solver",
    "solve_dirichlet_poisson",
    "write_coordinate",
]
