class LabError(Exception):
    """实验室内所有可预期错误的基类。"""


class ParameterError(LabError, ValueError):
    """形状参数、时间、模态数等输入参数不合法。"""


class MeshError(LabError, ValueError):
    """网格不满足不变量，或缺少所需的内部界面。"""


class AssemblyError(LabError, RuntimeError):
    """有限元组装失败，例如出现退化三角形。"""

    def __init__(self, message: str, triangle: int | None = None):
        super().__init__(message)
        self.triangle = triangle


class SolverError(LabError, RuntimeError):
    """线性求解崩溃或残差超过允许范围。"""


class EigenSolverError(SolverError):
    """特征求解不收敛；residuals 记录实际达到的残差。"""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class FitError(LabError, ValueError):
    """短时拟合的 Vandermonde 矩阵病态，需要更宽的时间窗口。"""


class ConfigError(LabError, ValueError):
    """实验配置不合法。"""
