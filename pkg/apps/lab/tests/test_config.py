import textwrap
from pathlib import Path

import pytest

from app.errors import ConfigError
from app.geometry import Family
from app.heatflow import DEFAULT_TIMES
from app.services import ExperimentConfig, HeatContentSettings, apply_overrides, load_config


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.ini"
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


def test_defaults():
    config = load_config(None)
    assert config.domain.family is Family.DISK
    assert config.domain.target_h == 0.05
    assert config.times == DEFAULT_TIMES
    assert config.modes == 150
    assert config.threshold is None
    assert config.band is None


def test_full_config(tmp_path):
    path = _write(
        tmp_path,
        """
        [domain]
        family = ellipse
        a = 1.5
        b = 1.0
        target_h = 0.1
        refine = 1

        [times]
        generator = geometric
        start = 0.1
        ratio = 3
        count = 3

        [taus]
        generator = log
        start = 0.01
        stop = 1.0
        count = 3

        [run]
        modes = 60
        threshold = 0.05
        seed = 11
        output_dir = out

        [heatcontent]
        psi = x
        evaluator = lanczos
        extrapolate = no

        [band]
        symmetric = 0.5
        n_points = 300
        """,
    )
    config = load_config(path)
    assert config.domain.family is Family.ELLIPSE
    assert (config.domain.a, config.domain.b) == (1.5, 1.0)
    assert config.refine == 1
    assert config.times == pytest.approx((0.1, 0.3, 0.9))
    assert config.taus == pytest.approx((0.01, 0.1, 1.0))
    assert config.modes == 60
    assert config.threshold == 0.05
    assert config.seed == 11
    assert config.output_dir == Path("out")
    assert config.heatcontent.psi == "x"
    assert not config.heatcontent.extrapolate
    assert config.band.symmetric_flag
    assert config.band.n_points == 300


def test_explicit_times_and_interface(tmp_path):
    path = _write(
        tmp_path,
        """
        [domain]
        family = annulus
        inner_radius = 0.3
        radius = 1.0
        interface_radius = 0.6

        [times]
        values = 0.1, 0.2 0.4
        """,
    )
    config = load_config(path)
    assert config.times == (0.1, 0.2, 0.4)
    assert config.domain.interface_radius == 0.6


def test_polygon_domain(tmp_path):
    path = _write(
        tmp_path,
        """
        [domain]
        family = polygon
        vertices = 0 0, 1 0, 1 1, 0 1
        target_h = 0.2
        """,
    )
    config = load_config(path)
    assert config.domain.vertices == ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


@pytest.mark.parametrize(
    "text",
    [
        "[domain]\nfamily = hexagon\n",
        "[domain]\nfamily = ellipse\na = 1.5\n",
        "[domain]\nfamily = polygon\nvertices = 0 0 1\n",
        "[times]\nvalues = 0.1 -0.2\n",
        "[times]\ngenerator = geometric\nstart = 0.1\n",
        "[times]\ngenerator = cubic\nstart = 0.1\ncount = 3\n",
        "[taus]\ngenerator = log\nstart = 1.0\nstop = 0.1\ncount = 3\n",
        "[run]\nmodes = 0\n",
        "[run]\nthreshold = -1\n",
        "[run]\nthreshold = abc\n",
        "[heatcontent]\npsi = z\n",
        "[heatcontent]\nt_min = 0.3\nt_max = 0.1\n",
        "[band]\ntheta1 = 2.0\ntheta2 = 1.0\n",
        "not an ini file",
    ],
)
def test_invalid_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_config_hash_is_stable():
    a = ExperimentConfig()
    b = ExperimentConfig(output_dir=Path("elsewhere"))
    assert a.config_hash == b.config_hash
    assert len(a.config_hash) == 64
    assert apply_overrides(a, modes=40).config_hash != a.config_hash


def test_canonical_form():
    canonical = ExperimentConfig(threshold=0.1).canonical()
    assert list(canonical) == sorted(canonical)
    assert canonical["threshold"] == 0.1
    assert ExperimentConfig().canonical()["threshold"] == "auto"
    assert "output_dir" not in canonical


def test_apply_overrides_ignores_none():
    config = ExperimentConfig()
    assert apply_overrides(config, modes=None, seed=None) is config
    changed = apply_overrides(config, output_dir="runs", refine=2)
    assert changed.output_dir == Path("runs")
    assert changed.refine == 2


def test_overrides_are_validated():
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), modes=0)


def test_heatcontent_settings_validation():
    with pytest.raises(ConfigError):
        HeatContentSettings(evaluator="exact")
    with pytest.raises(ConfigError):
        HeatContentSettings(t_min=0.0)
    settings = HeatContentSettings()
    assert 0 < settings.t_min < settings.t_max
    assert settings.psi == "one"


@pytest.mark.parametrize(
    "path", sorted((Path(__file__).parent.parent / "configs").glob("*.ini")), ids=lambda p: p.stem
)
def test_shipped_configs_load(path):
    config = load_config(path)
    assert config.output_dir.parts[0] == "results"
