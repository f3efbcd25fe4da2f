import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.errors import MeshError, ParameterError
from app.geometry import (
    DomainSpec,
    Family,
    Mesh,
    boundary_curvature,
    boundary_length,
    degenerate_vertices,
    family_for,
    integrated_curvature,
    loop_turning_angles,
    make_domain,
    mesh_area,
    read_mesh,
    refine,
    write_mesh,
)


def _loop_signed_area(mesh, loop):
    p = mesh.vertices[loop]
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def test_disk_mesh_invariants(disk_mesh):
    assert len(disk_mesh.boundary_loops) == 1
    assert np.all(disk_mesh.areas > 0)
    assert_allclose(mesh_area(disk_mesh), math.pi, rtol=5e-3)
    assert_allclose(boundary_length(disk_mesh), 2.0 * math.pi, rtol=5e-3)

    loop = disk_mesh.boundary_loops[0]
    assert_allclose(np.hypot(*disk_mesh.vertices[loop].T), 1.0, atol=1e-12)
    assert len(loop) % 12 == 0

    normals = disk_mesh.boundary_normal
    assert_allclose(np.linalg.norm(normals[loop], axis=1), 1.0, atol=1e-12)
    assert np.all(np.einsum("ij,ij->i", normals[loop], disk_mesh.vertices[loop]) > 0)
    assert np.all(normals[disk_mesh.interior_mask] == 0.0)


def test_mesh_arrays_are_read_only(disk_mesh):
    with pytest.raises(ValueError):
        disk_mesh.vertices[0, 0] = 1.0


def test_annulus_hole_loop_is_clockwise():
    mesh = make_domain(DomainSpec.annulus(0.3, 1.0, 0.1))
    assert len(mesh.boundary_loops) == 2
    outer, hole = mesh.boundary_loops
    assert _loop_signed_area(mesh, outer) > 0
    assert _loop_signed_area(mesh, hole) < 0
    assert_allclose(np.hypot(*mesh.vertices[hole].T), 0.3, atol=1e-12)
    assert_allclose(loop_turning_angles(mesh, 1).sum(), -2.0 * math.pi, atol=1e-10)
    assert_allclose(mesh_area(mesh), math.pi * (1.0 - 0.09), rtol=1e-2)


def test_interface_loop_lies_on_circle():
    mesh = make_domain(DomainSpec.disk(1.0, 0.1, interface_radius=0.5))
    assert len(mesh.interface_loops) == 1
    loop = mesh.interface_loops[0]
    assert np.all(mesh.interior_mask[loop])
    assert_allclose(np.hypot(*mesh.vertices[loop].T), 0.5, atol=1e-12)


@pytest.mark.parametrize(
    "spec",
    [
        DomainSpec.ellipse(1.5, 1.0, 0.1),
        DomainSpec.radial(0.1, 5, 0.1),
        DomainSpec.polygon([(0, 0), (1, 0), (1, 1), (0, 1)], 0.1),
    ],
    ids=["ellipse", "radial", "square"],
)
def test_family_areas(spec):
    mesh = make_domain(spec)
    assert_allclose(mesh_area(mesh), family_for(spec).area(), rtol=1e-2)
    assert_allclose(boundary_length(mesh), family_for(spec).perimeter(), rtol=1e-2)


def test_refine_projects_new_boundary_points(disk_mesh):
    fine = refine(disk_mesh)
    assert fine.n_vertices == disk_mesh.n_vertices + len(disk_mesh.edges)
    assert fine.n_triangles == 4 * disk_mesh.n_triangles
    loop = fine.boundary_loops[0]
    assert_allclose(np.hypot(*fine.vertices[loop].T), 1.0, atol=1e-12)
    assert fine.h < 0.6 * disk_mesh.h
    # 面积误差至少缩小到 0.6 倍
    assert abs(mesh_area(fine) - math.pi) <= 0.6 * abs(mesh_area(disk_mesh) - math.pi)


@pytest.mark.parametrize(
    "spec",
    [
        DomainSpec.disk(1.0, 0.1),
        DomainSpec.disk(1.0, 0.1, interface_radius=0.5),
        DomainSpec.ellipse(1.5, 1.0, 0.1),
        DomainSpec.annulus(0.3, 1.0, 0.1),
        DomainSpec.annulus(0.3, 1.0, 0.1, interface_radius=0.6),
        DomainSpec.radial(0.1, 5, 0.1),
        DomainSpec.polygon([(0, 0), (1, 0), (1, 1), (0, 1)], 0.1),
        DomainSpec.polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)], 0.1),
    ],
    ids=["disk", "nested", "ellipse", "annulus", "annulus-interface", "radial", "square", "L"],
)
def test_max_edge_within_factor_of_target(spec):
    mesh = make_domain(spec)
    assert mesh.h <= 1.5 * spec.target_h


def test_make_domain_rejects_oversized_edges(monkeypatch):
    monkeypatch.setattr("app.geometry.mesh.MAX_EDGE_FACTOR", 0.5)
    with pytest.raises(MeshError):
        make_domain(DomainSpec.disk(1.0, 0.2))


def test_radial_without_perturbation_is_the_disk():
    radial = make_domain(DomainSpec.radial(0.0, 4, 0.1))
    disk = make_domain(DomainSpec.disk(1.0, 0.1))
    assert_array_equal(radial.vertices, disk.vertices)
    assert_array_equal(radial.triangles, disk.triangles)


def test_refine_keeps_interface_on_circle():
    fine = refine(make_domain(DomainSpec.disk(1.0, 0.1, interface_radius=0.5)))
    loop = fine.interface_loops[0]
    assert_allclose(np.hypot(*fine.vertices[loop].T), 0.5, atol=1e-12)


def test_mesh_file_round_trip(tmp_path):
    spec = DomainSpec.annulus(0.3, 1.0, 0.1, interface_radius=0.6)
    mesh = make_domain(spec)
    path = write_mesh(mesh, tmp_path / "mesh.txt")
    again = read_mesh(path, spec)
    assert_array_equal(again.vertices, mesh.vertices)
    assert_array_equal(again.triangles, mesh.triangles)
    assert len(again.interface_loops) == 1
    assert_array_equal(again.interface_loops[0], mesh.interface_loops[0])


def test_read_mesh_rejects_inconsistent_flags(tmp_path):
    mesh = make_domain(DomainSpec.disk(1.0, 0.2))
    text = write_mesh(mesh, tmp_path / "ok.txt").read_text().splitlines()
    # 把第一个顶点的内部标记翻转
    x, y, flag = text[1].split()
    text[1] = f"{x} {y} {1 - int(flag)}"
    bad = tmp_path / "bad.txt"
    bad.write_text("\n".join(text) + "\n")
    with pytest.raises(MeshError):
        read_mesh(bad)


def test_from_triangles_rejects_clockwise_triangle():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        Mesh.from_triangles(vertices, np.array([[0, 2, 1]]))


def test_from_triangles_rejects_orphan_vertex():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    with pytest.raises(MeshError):
        Mesh.from_triangles(vertices, np.array([[0, 1, 2]]))


@pytest.mark.parametrize(
    "factory",
    [
        lambda: DomainSpec.annulus(1.0, 0.5),
        lambda: DomainSpec.radial(1.0, 3),
        lambda: DomainSpec.radial(0.1, 0),
        lambda: DomainSpec.disk(1.0, 0.05, interface_radius=1.0),
        lambda: DomainSpec.annulus(0.3, 1.0, interface_radius=0.2),
        lambda: DomainSpec.polygon([(0, 0), (1, 0)]),
        lambda: DomainSpec.disk(1.0, -0.1),
    ],
)
def test_domain_spec_validation(factory):
    with pytest.raises(ParameterError):
        factory()


def test_domain_spec_properties():
    assert DomainSpec.disk().smooth
    assert not DomainSpec.polygon([(0, 0), (1, 0), (0, 1)]).smooth
    assert not DomainSpec.annulus(0.3, 1.0).simply_connected
    assert DomainSpec.radial(0.1, 5).inradius == pytest.approx(0.9)
    assert DomainSpec.ellipse(1.5, 1.0).parameters()["family"] == Family.ELLIPSE.value


def test_disk_curvature_is_one(disk_mesh):
    assert_allclose(boundary_curvature(disk_mesh), 1.0, rtol=2e-3)
    assert_allclose(integrated_curvature(disk_mesh), 2.0 * math.pi, rtol=1e-10)


def test_annulus_inner_curvature_is_negative():
    mesh = make_domain(DomainSpec.annulus(0.5, 1.0, 0.05))
    assert_allclose(boundary_curvature(mesh, 1), -2.0, rtol=5e-3)


def test_ellipse_curvature_extremes(ellipse_mesh):
    kappa = boundary_curvature(ellipse_mesh)
    # a = 1.5, b = 1：κ_max = a/b² = 1.5，κ_min = b/a² = 4/9
    assert kappa.max() == pytest.approx(1.5, rel=2e-2)
    assert kappa.min() == pytest.approx(4.0 / 9.0, rel=2e-2)


def test_square_curvature_concentrates_at_corners():
    mesh = make_domain(DomainSpec.polygon([(0, 0), (1, 0), (1, 1), (0, 1)], 0.1))
    kappa = boundary_curvature(mesh)
    assert np.count_nonzero(kappa) == 4
    assert_allclose(integrated_curvature(mesh), 2.0 * math.pi, rtol=1e-10)
    loop = mesh.boundary_loops[0]
    assert len(degenerate_vertices(mesh, 0)) == len(loop) - 4


def test_curvature_rejects_bad_loop_index(disk_mesh):
    with pytest.raises(ParameterError):
        boundary_curvature(disk_mesh, 3)
