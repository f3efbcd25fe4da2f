import math

import numpy as np
import pytest

from app.errors import FitError, MeshError, ParameterError
from app.geometry import DomainSpec, make_domain
from app.heatflow import (
    DEFAULT_TIMES,
    Verdict,
    measure_noise,
    zero_average_test_functions,
)
from app.rigidity import (
    LanczosHeatContent,
    ModalHeatContent,
    curvature_constancy_check,
    fit_short_time,
    harmonic_test_function,
    heat_content,
    heat_content_targets,
    interior_surface_check,
    mode_mechanism,
    relative_noise,
    serrin_check,
    short_time_experiment,
    torsion,
    zero_average_annihilation,
)
from app.rigidity.heatcontent import weyl_mode_estimate


def _x(xy):
    return xy[:, 0]


# --- 扭转函数与 Serrin 通量 ---
def test_disk_torsion(disk_sys, disk_mesh, disk_basis):
    pair = torsion(disk_sys, disk_basis, 40)
    r2 = np.sum(disk_mesh.vertices**2, axis=1)
    assert np.abs(pair.direct - (1.0 - r2) / 4.0).max() <= 1e-3
    assert pair.discrepancy <= 1e-2
    assert pair.K == 40


def test_torsion_discrepancy_shrinks_with_modes(disk_sys, disk_basis):
    few = torsion(disk_sys, disk_basis, 10).discrepancy
    many = torsion(disk_sys, disk_basis, disk_basis.count).discrepancy
    assert many < few


def test_torsion_rejects_bad_mode_count(disk_sys, disk_basis):
    with pytest.raises(ParameterError):
        torsion(disk_sys, disk_basis, disk_basis.count + 1)


def test_serrin_disk(disk_sys, disk_basis):
    profile = serrin_check(disk_sys, torsion(disk_sys, disk_basis, 40))
    assert abs(profile.mean) == pytest.approx(0.5, rel=2e-2)
    assert profile.mean < 0
    assert profile.deviation <= 0.02


def test_serrin_ellipse_fails(ellipse_sys, ellipse_basis):
    profile = serrin_check(ellipse_sys, torsion(ellipse_sys, ellipse_basis, 40))
    assert profile.deviation >= 0.05


# --- 曲率 ---
def test_curvature_disk_passes(disk_mesh):
    report = curvature_constancy_check(disk_mesh)
    assert report.relative_std <= 0.02
    assert report.verdict is Verdict.PASS
    assert report.mean == pytest.approx(1.0, rel=1e-2)


def test_curvature_ellipse_fails(ellipse_mesh):
    report = curvature_constancy_check(ellipse_mesh)
    assert report.relative_std >= 0.2
    assert report.verdict is Verdict.FAIL
    assert report.kappa_min < report.mean < report.kappa_max


def test_curvature_radial_perturbation_detected():
    report = curvature_constancy_check(make_domain(DomainSpec.radial(0.05, 3, 0.05)))
    assert report.relative_std >= 0.05


def test_curvature_rejects_polygon():
    square = make_domain(DomainSpec.polygon([(0, 0), (1, 0), (1, 1), (0, 1)], 0.2))
    with pytest.raises(ParameterError):
        curvature_constancy_check(square)


# --- 内部界面 ---
def test_interior_concentric_disks_pass(nested_disk_sys, nested_disk_basis):
    report = interior_surface_check(
        nested_disk_sys, nested_disk_basis, DEFAULT_TIMES, DEFAULT_TIMES, 0.02
    )
    assert report.bounds_subdomain
    assert report.trace_passed
    assert report.flux_passed
    assert report.verdict is Verdict.PASS
    assert report.implies_rigidity
    assert np.all(report.trace_means > 0)


def test_interior_annulus_passes_without_rigidity(annulus_sys, annulus_basis):
    report = interior_surface_check(annulus_sys, annulus_basis, DEFAULT_TIMES, DEFAULT_TIMES, 0.02)
    assert not report.bounds_subdomain
    assert report.verdict is Verdict.PASS
    assert not report.implies_rigidity
    serrin = serrin_check(annulus_sys, torsion(annulus_sys, annulus_basis, 40))
    assert serrin.deviation >= 0.05


def test_interior_requires_interface(disk_sys, disk_basis):
    with pytest.raises(MeshError):
        interior_surface_check(disk_sys, disk_basis, DEFAULT_TIMES, DEFAULT_TIMES)


def test_interior_rejects_empty_times(nested_disk_sys, nested_disk_basis):
    with pytest.raises(ParameterError):
        interior_surface_check(nested_disk_sys, nested_disk_basis, DEFAULT_TIMES, [])


# --- 零均值测试函数与逐特征空间机制 ---
@pytest.fixture(scope="module")
def disk_noise(disk_sys, disk_basis):
    tests = zero_average_test_functions(disk_sys, 10, seed=0)
    return measure_noise(disk_sys, disk_basis, DEFAULT_TIMES, tests, 6)


def test_disk_mechanism_within_noise(disk_sys, disk_basis, disk_noise):
    _, pairing, mode = disk_noise
    tests = zero_average_test_functions(disk_sys, 10, seed=0)
    annihilation = zero_average_annihilation(disk_sys, disk_basis, tests, 2.0 * pairing)
    assert annihilation.passed
    assert annihilation.values.shape == (10, 3)
    modes = mode_mechanism(disk_sys, disk_basis, tests, 2.0 * mode)
    assert modes.passed
    assert modes.columns == tuple(float(g) for g in range(6))


def test_ellipse_first_mode_exceeds_disk_noise(ellipse_sys, ellipse_basis, disk_noise):
    _, _, mode = disk_noise
    tests = zero_average_test_functions(ellipse_sys, 10, seed=0)
    report = mode_mechanism(ellipse_sys, ellipse_basis, tests, 2.0 * mode)
    assert report.max_abs[0] >= 5.0 * mode
    assert not report.passed


def test_relative_noise_on_disk(disk_sys, disk_basis):
    noise = relative_noise(disk_sys, disk_basis)
    assert noise.deviation_threshold == 0.02
    tests = zero_average_test_functions(disk_sys, 10, seed=1)
    assert zero_average_annihilation(disk_sys, disk_basis, tests, noise.pairing_threshold).passed
    # 阈值与给定的相对偏差成正比
    half = relative_noise(disk_sys, disk_basis, 0.01)
    assert half.pairing_threshold == pytest.approx(0.5 * noise.pairing_threshold, rel=1e-12)
    assert half.mode_threshold == pytest.approx(0.5 * noise.mode_threshold, rel=1e-12)
    with pytest.raises(ParameterError):
        relative_noise(disk_sys, disk_basis, 0.0)


def test_mechanism_rejects_nonzero_mean_tests(disk_sys, disk_basis):
    tests = np.ones((1, len(disk_sys.boundary_dofs)))
    with pytest.raises(ParameterError):
        mode_mechanism(disk_sys, disk_basis, tests, 1.0)


# --- 热含量 ---
def test_heat_content_odd_test_function_vanishes(disk_sys, disk_basis):
    psi = harmonic_test_function(disk_sys, _x)
    for t in (0.3, 0.5, 1.0):
        assert abs(heat_content(disk_sys, disk_basis, psi, t)) <= 1e-6


def test_heat_content_requires_harmonic_psi(disk_sys, disk_basis, disk_mesh):
    psi = np.sum(disk_mesh.vertices**2, axis=1)
    with pytest.raises(ParameterError):
        heat_content(disk_sys, disk_basis, psi, 0.5)


def test_lanczos_matches_modal(disk_sys, disk_basis):
    modal = ModalHeatContent(disk_sys, disk_basis)
    lanczos = LanczosHeatContent(disk_sys)
    for psi_fn in (None, lambda xy: 1.0 + xy[:, 0] * xy[:, 1]):
        psi = harmonic_test_function(disk_sys, psi_fn)
        for t in (0.5, 0.8):
            expected = modal.evaluate(psi, t)
            assert not expected.truncated
            assert lanczos.evaluate(psi, t).value == pytest.approx(expected.value, rel=1e-6)


def test_heat_content_at_long_time_decays(disk_sys, disk_basis):
    psi = harmonic_test_function(disk_sys, None)
    early = heat_content(disk_sys, disk_basis, psi, 0.3)
    late = heat_content(disk_sys, disk_basis, psi, 1.0)
    assert 0 < late < early < disk_sys.area


def test_heat_content_targets_for_disk(disk_sys):
    c0, c1, c2 = heat_content_targets(disk_sys, harmonic_test_function(disk_sys, None))
    assert c0 == pytest.approx(math.pi, rel=5e-3)
    assert c1 == pytest.approx(-4.0 * math.sqrt(math.pi), rel=5e-3)
    assert c2 == pytest.approx(math.pi, rel=5e-3)


def test_fit_recovers_polynomial():
    t = np.linspace(0.05, 0.3, 12)
    f = 3.0 - 2.0 * t + 0.5 * t**2 + 0.1 * t**3
    fit = fit_short_time(list(zip(t, f, strict=True)), degree=3, targets=(3.0, -2.0, 0.5))
    assert fit.c0 == pytest.approx(3.0, rel=1e-9)
    assert fit.c1 == pytest.approx(-2.0, rel=1e-8)
    assert fit.c2 == pytest.approx(0.5, rel=1e-7)
    assert fit.residual < 1e-12
    assert fit.agrees()
    assert max(fit.relative_errors) < 1e-6


def test_fit_disagrees_with_wrong_targets():
    t = np.linspace(0.05, 0.3, 12)
    f = 3.0 - 2.0 * t + 0.5 * t**2
    fit = fit_short_time(list(zip(t, f, strict=True)), targets=(3.0, -2.2, 0.5))
    assert not fit.agrees()


def test_fit_without_targets_never_agrees():
    t = np.linspace(0.05, 0.3, 8)
    fit = fit_short_time(list(zip(t, 1.0 + t, strict=True)))
    assert fit.relative_errors is None
    assert not fit.agrees()


def test_fit_rejects_ill_conditioned_window():
    t = np.linspace(1.0, 1.0 + 1e-5, 8)
    with pytest.raises(FitError):
        fit_short_time(list(zip(t, np.ones_like(t), strict=True)))


@pytest.mark.parametrize(
    "samples, degree",
    [
        ([(0.1 * k, 1.0) for k in range(1, 4)], 3),
        ([(0.1 * k, 1.0) for k in range(1, 10)], 1),
        ([(0.1 * k, 1.0) for k in (1, 2, 3, 3, 4, 5, 6)], 3),
        ([(0.1 * k, 1.0) for k in range(-1, 7)], 3),
    ],
    ids=["too-few", "low-degree", "repeated", "non-positive"],
)
def test_fit_rejects_bad_samples(samples, degree):
    with pytest.raises(ParameterError):
        fit_short_time(samples, degree=degree)


def test_weyl_mode_estimate():
    assert weyl_mode_estimate(math.pi, 0.0025) > 150
    assert weyl_mode_estimate(math.pi, 1.0) < 10


def test_short_time_zero_average_psi():
    mesh = make_domain(DomainSpec.disk(1.0, 0.1))
    result = short_time_experiment(mesh, _x, extrapolate=False, evaluator="lanczos")
    assert np.abs(result.fit.targets).max() <= 1e-12
    assert np.abs(result.fit.coefficients[:3]).max() <= 1e-8
    assert result.evaluator == "lanczos"
    assert not result.outside_theory


def test_short_time_polygon_is_outside_theory():
    mesh = make_domain(DomainSpec.polygon([(0, 0), (1, 0), (1, 1), (0, 1)], 0.1))
    result = short_time_experiment(mesh, extrapolate=False, evaluator="lanczos")
    assert result.outside_theory


def test_short_time_rejects_bad_arguments(disk_mesh):
    with pytest.raises(ParameterError):
        short_time_experiment(disk_mesh, evaluator="bogus")
    with pytest.raises(ParameterError):
        short_time_experiment(disk_mesh, window=(0.3, 0.1))


@pytest.mark.slow
def test_short_time_unit_disk():
    # 默认窗口 t ∈ [0.02, 0.2]；网格边长不超过 t_min
    mesh = make_domain(DomainSpec.disk(1.0, 0.02))
    result = short_time_experiment(mesh)
    assert result.window == (0.02, 0.2)
    assert result.evaluator == "lanczos"
    fit = result.fit
    assert result.extrapolated
    assert fit.c0 == pytest.approx(math.pi, rel=5e-3)
    assert fit.c1 == pytest.approx(-4.0 * math.sqrt(math.pi), rel=2e-2)
    assert fit.c2 == pytest.approx(math.pi, rel=0.1)
    assert fit.agrees()


@pytest.mark.slow
def test_short_time_radius_two_disk():
    result = short_time_experiment(make_domain(DomainSpec.disk(2.0, 0.05)), window=(0.05, 0.3))
    assert result.fit.c1 == pytest.approx(-8.0 * math.sqrt(math.pi), rel=2e-2)
