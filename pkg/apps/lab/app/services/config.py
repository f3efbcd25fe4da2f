from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import structlog

from app.errors import ConfigError, LabError
from app.geometry.domains import DomainSpec, Family
from app.heatflow.overdetermination import DEFAULT_TIMES
from app.rigidity.heatcontent import DEFAULT_DEGREE, DEFAULT_SAMPLES, DEFAULT_WINDOW
from app.sphereband.geometry import BandSpec

logger = structlog.get_logger(__name__)

DEFAULT_MODES = 150
DEFAULT_TOLERANCE = 1e-8
DEFAULT_WORKERS = 4
PSI_CHOICES = ("one", "x", "y", "xy", "quadrupole")
EVALUATOR_CHOICES = ("auto", "modal", "lanczos")


@dataclass(frozen=True)
class HeatContentSettings:
    t_min: float = DEFAULT_WINDOW[0]
    t_max: float = DEFAULT_WINDOW[1]
    samples: int = DEFAULT_SAMPLES
    degree: int = DEFAULT_DEGREE
    psi: str = "one"
    extrapolate: bool = True
    evaluator: str = "auto"

    def __post_init__(self):
        if self.psi not in PSI_CHOICES:
            raise ConfigError(f"未知的 ψ {self.psi!r}，可选 {PSI_CHOICES}")
        if self.evaluator not in EVALUATOR_CHOICES:
            raise ConfigError(f"未知的热含量求值器 {self.evaluator!r}，可选 {EVALUATOR_CHOICES}")
        if not 0 < self.t_min < self.t_max:
            raise ConfigError(
                f"热含量窗口要求 0 < t_min < t_max，实际为 {self.t_min}, {self.t_max}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    """
    一次实验的完整配置。

    threshold 为 None 表示自动：flux 子命令按同分辨率圆盘的实测噪声定阈值，
    其他判定使用固定的 0.02。
    """

    domain: DomainSpec = field(default_factory=lambda: DomainSpec.disk(1.0, 0.05))
    refine: int = 0
    times: tuple[float, ...] = DEFAULT_TIMES
    taus: tuple[float, ...] = DEFAULT_TIMES
    modes: int = DEFAULT_MODES
    tolerance: float = DEFAULT_TOLERANCE
    threshold: float | None = None
    seed: int = 0
    workers: int = DEFAULT_WORKERS
    output_dir: Path = Path("results")
    heatcontent: HeatContentSettings = field(default_factory=HeatContentSettings)
    band: BandSpec | None = None

    def __post_init__(self):
        for name in ("times", "taus"):
            _check_times(name, getattr(self, name))
        if self.modes < 1:
            raise ConfigError(f"modes 至少为 1，实际为 {self.modes}")
        if self.refine < 0:
            raise ConfigError(f"refine 不能为负，实际为 {self.refine}")
        if self.workers < 1:
            raise ConfigError(f"workers 至少为 1，实际为 {self.workers}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance 必须为正，实际为 {self.tolerance}")
        if self.threshold is not None and not self.threshold > 0:
            raise ConfigError(f"threshold 必须为正，实际为 {self.threshold}")

    def canonical(self) -> dict[str, object]:
        """用于哈希和报告的规范化表示，键按字母序排列；输出目录不参与。"""
        return {
            "band": None if self.band is None else self.band.parameters(),
            "domain": self.domain.parameters(),
            "heatcontent": asdict(self.heatcontent),
            "modes": self.modes,
            "refine": self.refine,
            "seed": self.seed,
            "taus": list(self.taus),
            "threshold": "auto" if self.threshold is None else self.threshold,
            "times": list(self.times),
            "tolerance": self.tolerance,
        }

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _check_times(name: str, values: tuple[float, ...]) -> None:
    if not values:
        raise ConfigError(f"{name} 不能为空")
    if any(not (v > 0 and math.isfinite(v)) for v in values):
        raise ConfigError(f"{name} 中的所有时间必须为有限正数")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_times(section: configparser.SectionProxy) -> tuple[float, ...]:
    """
    读取时间序列：显式列表 values，或生成器。

    generator = geometric 使用 start、ratio（缺省 2）与 count，生成 start·ratioⁿ；
    generator = log 使用 start、stop 与 count，生成对数等距序列（含端点）。
    """
    if "values" in section:
        return tuple(_floats(section["values"]))
    generator = section.get("generator", "geometric").strip().lower()
    start = section.getfloat("start")
    count = section.getint("count")
    if start is None or count is None:
        raise ConfigError(f"[{section.name}] 的生成器需要 start 与 count")
    if generator == "geometric":
        ratio = section.getfloat("ratio", 2.0)
        return tuple(float(start * ratio**n) for n in range(count))
    if generator == "log":
        stop = section.getfloat("stop")
        if stop is None:
            raise ConfigError(f"[{section.name}] 的 log 生成器需要 stop")
        if not 0 < start < stop:
            raise ConfigError(f"[{section.name}] 要求 0 < start < stop")
        return tuple(np.geomspace(start, stop, count).tolist())
    raise ConfigError(f"[{section.name}] 未知的时间生成器 {generator!r}")


def _parse_domain(section: configparser.SectionProxy) -> DomainSpec:
    try:
        family = Family(section.get("family", "disk").strip().lower())
    except ValueError as e:
        raise ConfigError(f"未知的区域形状族 {section.get('family')!r}") from e
    kwargs: dict[str, object] = {"target_h": section.getfloat("target_h", 0.05)}
    if "interface_radius" in section:
        kwargs["interface_radius"] = section.getfloat("interface_radius")

    if family is Family.DISK:
        return DomainSpec.disk(section.getfloat("radius", 1.0), **kwargs)
    if family is Family.ELLIPSE:
        return DomainSpec.ellipse(section.getfloat("a"), section.getfloat("b"), **kwargs)
    if family is Family.ANNULUS:
        return DomainSpec.annulus(
            section.getfloat("inner_radius"), section.getfloat("radius"), **kwargs
        )
    if family is Family.RADIAL:
        return DomainSpec.radial(section.getfloat("epsilon"), section.getint("mode"), **kwargs)
    coords = _floats(section.get("vertices", ""))
    if len(coords) % 2:
        raise ConfigError("多边形顶点坐标个数必须为偶数（x y 成对）")
    vertices = list(zip(coords[::2], coords[1::2], strict=True))
    return DomainSpec.polygon(vertices, section.getfloat("target_h", 0.05))


def _parse_band(section: configparser.SectionProxy) -> BandSpec:
    n_points = section.getint("n_points", 2000)
    if "cap" in section:
        return BandSpec.cap(section.getfloat("cap"), n_points)
    if "symmetric" in section:
        return BandSpec.symmetric(section.getfloat("symmetric"), n_points)
    return BandSpec.band(section.getfloat("theta1"), section.getfloat("theta2"), n_points)


def _parse_run(section: configparser.SectionProxy) -> dict[str, object]:
    threshold = section.get("threshold", "auto").strip().lower()
    out: dict[str, object] = {
        "modes": section.getint("modes", DEFAULT_MODES),
        "tolerance": section.getfloat("tolerance", DEFAULT_TOLERANCE),
        "threshold": None if threshold == "auto" else float(threshold),
        "seed": section.getint("seed", 0),
        "workers": section.getint("workers", DEFAULT_WORKERS),
    }
    if "output_dir" in section:
        out["output_dir"] = Path(section["output_dir"])
    return out


def _parse_heatcontent(section: configparser.SectionProxy) -> HeatContentSettings:
    return HeatContentSettings(
        t_min=section.getfloat("t_min", DEFAULT_WINDOW[0]),
        t_max=section.getfloat("t_max", DEFAULT_WINDOW[1]),
        samples=section.getint("samples", DEFAULT_SAMPLES),
        degree=section.getint("degree", DEFAULT_DEGREE),
        psi=section.get("psi", "one").strip().lower(),
        extrapolate=section.getboolean("extrapolate", True),
        evaluator=section.get("evaluator", "auto").strip().lower(),
    )


def _config_kwargs(parser: configparser.ConfigParser) -> dict[str, object]:
    kwargs: dict[str, object] = {}
    if parser.has_section("domain"):
        kwargs["domain"] = _parse_domain(parser["domain"])
        kwargs["refine"] = parser["domain"].getint("refine", 0)
    for name in ("times", "taus"):
        if parser.has_section(name):
            kwargs[name] = parse_times(parser[name])
    if parser.has_section("run"):
        kwargs.update(_parse_run(parser["run"]))
    if parser.has_section("heatcontent"):
        kwargs["heatcontent"] = _parse_heatcontent(parser["heatcontent"])
    if parser.has_section("band"):
        kwargs["band"] = _parse_band(parser["band"])
    return kwargs


def load_config(path: str | os.PathLike | None = None) -> ExperimentConfig:
    """
    读取 INI 格式的实验配置；path 为 None 时返回缺省配置。

    参数:
        path: 配置文件路径。

    返回:
        ExperimentConfig: 经过校验的配置。
    """
    if path is None:
        return ExperimentConfig()
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}") from e

    try:
        config = ExperimentConfig(**_config_kwargs(parser))
    except ConfigError:
        raise
    except (LabError, ValueError, TypeError) as e:
        raise ConfigError(f"配置文件 {path} 无效: {e}") from e

    logger.debug("实验配置已加载", path=str(path), config_hash=config.config_hash)
    return config


def apply_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """命令行参数覆盖配置文件中的值；值为 None 的参数忽略。"""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if "output_dir" in changes:
        changes["output_dir"] = Path(changes["output_dir"])
    return replace(config, **changes) if changes else config
