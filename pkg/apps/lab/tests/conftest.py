import numpy as np
import pytest

from app.fem.assembly import assemble
from app.geometry.domains import DomainSpec
from app.geometry.mesh import make_domain
from app.spectral.basis import eigenbasis

DISK_MODES = 150


@pytest.fixture(scope="session")
def disk_mesh():
    return make_domain(DomainSpec.disk(1.0, 0.05))


@pytest.fixture(scope="session")
def disk_sys(disk_mesh):
    return assemble(disk_mesh)


@pytest.fixture(scope="session")
def disk_basis(disk_sys):
    return eigenbasis(disk_sys, DISK_MODES)


@pytest.fixture(scope="session")
def ellipse_mesh():
    return make_domain(DomainSpec.ellipse(1.5, 1.0, 0.05))


@pytest.fixture(scope="session")
def ellipse_sys(ellipse_mesh):
    return assemble(ellipse_mesh)


@pytest.fixture(scope="session")
def ellipse_basis(ellipse_sys):
    return eigenbasis(ellipse_sys, DISK_MODES)


@pytest.fixture(scope="session")
def annulus_sys():
    """圆环 (0.3, 1)，ρ = 0.6 处带内部界面。"""
    return assemble(make_domain(DomainSpec.annulus(0.3, 1.0, 0.05, interface_radius=0.6)))


@pytest.fixture(scope="session")
def annulus_basis(annulus_sys):
    return eigenbasis(annulus_sys, DISK_MODES)


@pytest.fixture(scope="session")
def nested_disk_sys():
    """单位圆盘，ρ = 0.5 处带同心内部界面。"""
    return assemble(make_domain(DomainSpec.disk(1.0, 0.05, interface_radius=0.5)))


@pytest.fixture(scope="session")
def nested_disk_basis(nested_disk_sys):
    return eigenbasis(nested_disk_sys, DISK_MODES)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
