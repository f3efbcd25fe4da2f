from app.geometry.curvature import (
    boundary_curvature,
    degenerate_vertices,
    integrated_curvature,
    loop_turning_angles,
)
from app.geometry.domains import DomainSpec, Family
from app.geometry.families import family_for
from app.geometry.io import read_mesh, write_mesh
from app.geometry.mesh import (
    Mesh,
    boundary_length,
    make_domain,
    max_edge_length,
    mesh_area,
    refine,
)

__all__ = [
    "DomainSpec",
    "Family",
    "Mesh",
    "boundary_curvature",
    "boundary_length",
    "degenerate_vertices",
    "family_for",
    "integrated_curvature",
    "loop_turning_angles",
    "make_domain",
    "max_edge_length",
    "mesh_area",
    "read_mesh",
    "refine",
    "write_mesh",
]
