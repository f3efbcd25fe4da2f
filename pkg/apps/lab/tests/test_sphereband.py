import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import ParameterError
from app.heatflow import DEFAULT_TIMES, Verdict
from app.sphereband import (
    BandSpec,
    assemble_band,
    band_eigenbasis,
    band_flux,
    band_torsion,
    constant_flow_report,
)


@pytest.fixture(scope="module")
def symmetric_basis():
    spec = BandSpec.symmetric(0.5)
    return spec, band_eigenbasis(spec, 100)


def test_hemisphere_eigenvalues():
    basis = band_eigenbasis(BandSpec.cap(0.5 * math.pi), 4)
    # 赤道 Dirichlet 条件下的轴对称特征值 l(l+1)，l 为奇数
    assert basis.lambdas[0] == pytest.approx(2.0, rel=1e-3)
    assert basis.lambdas[1] == pytest.approx(12.0, rel=1e-3)
    assert basis.lambdas[2] == pytest.approx(30.0, rel=1e-3)


def test_band_basis_is_weighted_orthonormal(symmetric_basis):
    spec, basis = symmetric_basis
    gram = basis.modes.T @ (basis.band.mass @ basis.modes)
    assert np.abs(gram - np.eye(basis.count)).max() <= 1e-8
    assert basis.area == pytest.approx(spec.area / (2.0 * math.pi), rel=1e-6)
    assert float(np.sum(basis.alphas**2)) <= basis.area


def test_symmetric_grid_is_mirrored():
    for n in (400, 401):
        theta = BandSpec.symmetric(0.3, n).grid()
        half = n // 2
        assert np.array_equal(theta[n - half :], math.pi - theta[:half][::-1])
        assert np.all(np.diff(theta) > 0)


def test_assemble_band_dofs():
    cap = assemble_band(BandSpec.cap(1.0, 200))
    assert cap.end_nodes == (199,)
    assert cap.dof_map[0] == 0
    band = assemble_band(BandSpec.band(0.5, 2.0, 200))
    assert band.end_nodes == (0, 199)
    assert len(band.dof_map) == 198
    # 带权质量矩阵的总和是 ∫ sin θ dθ
    total = float(band.mass.sum())
    assert total == pytest.approx(math.cos(0.5) - math.cos(2.0), rel=1e-10)


def test_symmetric_band_fluxes_agree(symmetric_basis):
    spec, basis = symmetric_basis
    for t in DEFAULT_TIMES:
        q1, q2 = band_flux(basis, spec, t)
        assert q1 < 0
        assert abs(q1 - q2) <= 1e-6 * abs(q1)


def test_cap_flux_has_single_circle():
    spec = BandSpec.cap(1.0, 400)
    basis = band_eigenbasis(spec, 40)
    q, missing = band_flux(basis, spec, 0.2)
    assert q < 0
    assert math.isnan(missing)


def test_band_flux_rejects_mismatched_spec(symmetric_basis):
    _, basis = symmetric_basis
    with pytest.raises(ParameterError):
        band_flux(basis, BandSpec.band(0.6, 2.2), 0.1)
    with pytest.raises(ParameterError):
        band_flux(basis, basis.band.spec, 0.0)


def test_constant_flow_symmetric_band_passes():
    report = constant_flow_report(BandSpec.symmetric(0.5, 1000), DEFAULT_TIMES, count=100)
    assert report.verdict is Verdict.PASS
    assert report.relative_gaps.max() <= 1e-6


def test_constant_flow_asymmetric_band_fails():
    spec = BandSpec.band(0.6, 2.2)
    report = constant_flow_report(spec, DEFAULT_TIMES)
    assert report.verdict is Verdict.FAIL
    assert report.relative_gaps.max() >= 0.05

    coarse = constant_flow_report(BandSpec.band(0.6, 2.2, 1000), DEFAULT_TIMES)
    assert np.allclose(coarse.relative_gaps, report.relative_gaps, rtol=0.2)


def test_constant_flow_cap_passes():
    report = constant_flow_report(BandSpec.cap(1.0, 400), DEFAULT_TIMES, count=50)
    assert report.verdict is Verdict.PASS
    assert np.all(report.F == 0.0)
    assert np.all(np.isnan(report.q2))


def test_constant_flow_rejects_empty_times():
    with pytest.raises(ParameterError):
        constant_flow_report(BandSpec.symmetric(0.5, 200), [])


def test_band_torsion(symmetric_basis):
    spec, basis = symmetric_basis
    result = band_torsion(spec, basis)
    assert result.discrepancy <= 1e-2
    assert result.fluxes[0] == pytest.approx(result.fluxes[1], rel=1e-6)
    assert np.all(result.direct[list(basis.band.end_nodes)] == 0.0)


def test_band_eigenbasis_rejects_bad_count():
    with pytest.raises(ParameterError):
        band_eigenbasis(BandSpec.symmetric(0.5, 200), 0)
    with pytest.raises(ParameterError):
        band_eigenbasis(BandSpec.symmetric(0.5, 200), 198)


@pytest.mark.parametrize(
    "factory",
    [
        lambda: BandSpec.band(0.0, 1.0),
        lambda: BandSpec.band(2.0, 1.0),
        lambda: BandSpec.band(0.5, 4.0),
        lambda: BandSpec.cap(math.pi),
        lambda: BandSpec.symmetric(1.0),
        lambda: BandSpec.symmetric(0.5, 50),
    ],
)
def test_band_spec_validation(factory):
    with pytest.raises(ParameterError):
        factory()


def test_band_spec_properties():
    cap = BandSpec.cap(1.0)
    assert cap.is_cap
    assert cap.circles == (1.0,)
    assert not cap.symmetric_flag
    assert cap.area == pytest.approx(2.0 * math.pi * (1.0 - math.cos(1.0)))
    assert BandSpec.symmetric(0.5).symmetric_flag
    assert not BandSpec.band(0.6, 2.2).symmetric_flag
    assert BandSpec.band(0.6, 2.2).parameters() == {
        "n_points": 2000,
        "theta1": 0.6,
        "theta2": 2.2,
    }


@pytest.mark.parametrize(
    "factory", [lambda n: BandSpec.cap(0.5 * math.pi, n), lambda n: BandSpec.symmetric(0.5, n)]
)
def test_first_eigenvalue_converges_with_grid(factory):
    coarse = band_eigenbasis(factory(1000), 3).lambdas[0]
    fine = band_eigenbasis(factory(2000), 3).lambdas[0]
    assert coarse == pytest.approx(fine, rel=1e-3)


def test_symmetric_band_modes_have_parity(symmetric_basis):
    _, basis = symmetric_basis
    # 镜像网格上 φ(θ) = ±φ(π − θ)
    for k in range(10):
        phi = basis.modes[:, k]
        mirrored = phi[::-1]
        sign = 1.0 if float(phi @ mirrored) >= 0 else -1.0
        assert np.abs(phi - sign * mirrored).max() <= 1e-6 * np.abs(phi).max()


def test_constant_flow_reuses_given_basis():
    spec = BandSpec.band(0.6, 2.2, 600)
    basis = band_eigenbasis(spec, 100)
    reused = constant_flow_report(spec, DEFAULT_TIMES, count=100, basis=basis)
    fresh = constant_flow_report(spec, DEFAULT_TIMES, count=100)
    assert_allclose(reused.q1, fresh.q1, rtol=1e-8)
    assert_allclose(reused.q2, fresh.q2, rtol=1e-8)
    assert reused.verdict is fresh.verdict

    with pytest.raises(ParameterError):
        constant_flow_report(BandSpec.band(0.6, 2.2, 400), DEFAULT_TIMES, basis=basis)
