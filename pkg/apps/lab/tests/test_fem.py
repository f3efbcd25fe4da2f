import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import AssemblyError, MeshError, ParameterError
from app.fem import (
    DirectSolver,
    JacobiCGSolver,
    assemble,
    discrete_harmonic_extension,
    harmonic_residual,
    interface_matrices,
    select_solver,
    solve_dirichlet_poisson,
    write_coordinate,
)
from app.fem.assembly import _element_matrices
from app.geometry import DomainSpec, make_domain


def test_matrices_are_symmetric(disk_sys):
    for matrix in (disk_sys.K, disk_sys.M, disk_sys.B):
        assert abs(matrix - matrix.T).max() < 1e-14


def test_stiffness_annihilates_constants(disk_sys):
    assert np.abs(disk_sys.K @ np.ones(disk_sys.n_vertices)).max() < 1e-12


def test_mass_and_boundary_mass_totals(disk_sys, disk_mesh):
    assert disk_sys.area == pytest.approx(float(np.sum(disk_mesh.areas)), rel=1e-12)
    assert disk_sys.perimeter == pytest.approx(2.0 * math.pi, rel=5e-3)
    assert disk_sys.B_bb.shape == (len(disk_sys.boundary_dofs),) * 2


def test_stiffness_reproduces_dirichlet_energy(disk_sys, disk_mesh):
    # ∫|∇x|² = |Ω|，P1 精确表示线性函数
    x = disk_mesh.vertices[:, 0]
    assert float(x @ (disk_sys.K @ x)) == pytest.approx(disk_sys.area, rel=1e-12)


def test_restrict_and_prolong(disk_sys):
    values = np.arange(disk_sys.n_interior, dtype=float)
    field = disk_sys.prolong(values)
    assert np.all(disk_sys.boundary_values(field) == 0.0)
    assert_allclose(disk_sys.restrict(field), values)


def test_torsion_matches_closed_form(disk_sys, disk_mesh):
    v = solve_dirichlet_poisson(disk_sys, np.ones(disk_sys.n_vertices))
    r2 = np.sum(disk_mesh.vertices**2, axis=1)
    assert np.abs(v - (1.0 - r2) / 4.0).max() <= 1e-3
    assert np.all(disk_sys.boundary_values(v) == 0.0)


def test_poisson_rejects_wrong_shape(disk_sys):
    with pytest.raises(ParameterError):
        solve_dirichlet_poisson(disk_sys, np.ones(3))


def test_harmonic_extension_of_linear_data_is_exact(disk_sys, disk_mesh):
    x = disk_mesh.vertices[:, 0]
    extension = discrete_harmonic_extension(disk_sys, disk_sys.boundary_values(x))
    assert_allclose(extension, x, atol=1e-10)
    assert harmonic_residual(disk_sys, extension) < 1e-12


def test_interface_matrices_concentric(nested_disk_sys):
    iface = interface_matrices(nested_disk_sys.mesh)
    assert iface.bounds_subdomain
    assert float(iface.M_omega.sum()) == pytest.approx(math.pi * 0.25, rel=1e-2)
    assert float(iface.B_gamma_loop.sum()) == pytest.approx(math.pi, rel=1e-2)


def test_interface_matrices_annulus_does_not_bound(annulus_sys):
    iface = interface_matrices(annulus_sys.mesh)
    assert not iface.bounds_subdomain


def test_interface_matrices_require_interface(disk_sys):
    with pytest.raises(MeshError):
        interface_matrices(disk_sys.mesh)


def test_write_coordinate_is_sorted(tmp_path):
    sys = assemble(make_domain(DomainSpec.disk(1.0, 0.3)))
    path = write_coordinate(sys.K, tmp_path / "K.txt")
    lines = path.read_text().splitlines()
    rows, cols, nnz = (int(v) for v in lines[0].lstrip("# ").split())
    assert (rows, cols) == sys.K.shape
    assert nnz == len(lines) - 1
    keys = [tuple(int(v) for v in line.split()[:2]) for line in lines[1:]]
    assert keys == sorted(keys)


def test_jacobi_cg_matches_direct(disk_sys, rng):
    rhs = rng.standard_normal((disk_sys.n_interior, 2))
    direct = select_solver(disk_sys.K_ii)
    assert isinstance(direct, DirectSolver)
    cg = JacobiCGSolver(disk_sys.K_ii, rtol=1e-11)
    expected = direct.solve(rhs)
    assert np.linalg.norm(cg.solve(rhs) - expected) <= 1e-6 * np.linalg.norm(expected)
    assert cg.solve(rhs[:, 0]).shape == (disk_sys.n_interior,)


def test_reference_triangle_element_matrices():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    areas, stiffness, mass = _element_matrices(vertices, np.array([[0, 1, 2]]))
    assert areas[0] == pytest.approx(0.5)
    assert_allclose(mass[0], np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0, atol=1e-15)
    assert_allclose(stiffness[0], np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]) / 2.0)


def test_degenerate_triangle_is_rejected():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(AssemblyError) as excinfo:
        _element_matrices(vertices, np.array([[0, 1, 2], [0, 1, 3]]))
    assert excinfo.value.triangle == 1


def test_galerkin_orthogonality(disk_sys, disk_mesh, rng):
    f = 1.0 + disk_mesh.vertices[:, 0] ** 2
    v = solve_dirichlet_poisson(disk_sys, f)
    for _ in range(5):
        w = disk_sys.prolong(rng.standard_normal(disk_sys.n_interior))
        lhs, rhs = float(w @ (disk_sys.K @ v)), float(w @ (disk_sys.M @ f))
        assert lhs == pytest.approx(rhs, rel=1e-9)


def test_harmonic_extension_minimizes_energy(disk_sys, disk_mesh, rng):
    psi = disk_sys.boundary_values(np.exp(disk_mesh.vertices[:, 0]))
    extension = discrete_harmonic_extension(disk_sys, psi)
    energy = float(extension @ (disk_sys.K @ extension))
    for _ in range(5):
        perturbed = extension + disk_sys.prolong(rng.standard_normal(disk_sys.n_interior))
        assert float(perturbed @ (disk_sys.K @ perturbed)) > energy


def test_harmonic_extension_of_constant(disk_sys):
    psi = np.full(len(disk_sys.boundary_dofs), 2.5)
    assert_allclose(discrete_harmonic_extension(disk_sys, psi), 2.5, rtol=1e-10)


def test_harmonic_extension_of_quadratic_harmonic(disk_sys, disk_mesh):
    x, y = disk_mesh.vertices.T
    exact = x**2 - y**2
    extension = discrete_harmonic_extension(disk_sys, disk_sys.boundary_values(exact))
    # h = 0.05 时误差为 O(h²)
    assert np.abs(extension - exact).max() <= 1e-2
