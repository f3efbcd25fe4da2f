import numpy as np
import structlog

from app.errors import ParameterError, SolverError
from app.fem.assembly import SystemMatrices

logger = structlog.get_logger(__name__)

POISSON_RESIDUAL_TOL = 1e-10
# 离散极值原理允许的舍入松弛
_MAX_PRINCIPLE_SLACK = 1e-10


def solve_dirichlet_poisson(sys: SystemMatrices, f: np.ndarray) -> np.ndarray:
    """
    求解 -Δv = f, v|∂Ω = 0 的 P1 离散：K_ii v_i = (M f)_i。

    参数:
        sys: 组装好的系统矩阵。
        f: 全网格节点场（标量）。

    返回:
        np.ndarray: 全网格节点场 v，边界上严格为零。
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (sys.n_vertices,):
        raise ParameterError(f"右端项长度 {f.shape} 与顶点数 {sys.n_vertices} 不符")

    rhs = sys.restrict(sys.M @ f)
    v_int = sys.solver.solve(rhs)

    scale = max(float(np.linalg.norm(rhs)), np.finfo(float).tiny)
    residual = float(np.linalg.norm(sys.K_ii @ v_int - rhs)) / scale
    if np.linalg.norm(rhs) > 0 and residual > POISSON_RESIDUAL_TOL:
        raise SolverError(f"Poisson 求解相对残差 {residual:.3e} 超过 {POISSON_RESIDUAL_TOL:g}")
    return sys.prolong(v_int)


def discrete_harmonic_extension(sys: SystemMatrices, psi: np.ndarray) -> np.ndarray:
    """
    边界数据 ψ 的离散调和延拓：内部满足 K_ii ψ̃_i = -K_ib ψ。

    参数:
        sys: 系统矩阵。
        psi: 按 sys.boundary_dofs 顺序排列的边界节点值。

    返回:
        np.ndarray: 全网格节点场 ψ̃，边界上等于 ψ。
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (len(sys.boundary_dofs),):
        raise ParameterError(
            f"边界数据长度 {psi.shape} 与边界顶点数 {len(sys.boundary_dofs)} 不符"
        )

    extension = np.zeros(sys.n_vertices)
    extension[sys.boundary_dofs] = psi
    extension[sys.dof_map] = sys.solver.solve(-(sys.K_ib @ psi))

    low, high = float(psi.min()), float(psi.max())
    slack = _MAX_PRINCIPLE_SLACK * max(1.0, abs(low), abs(high))
    if extension.min() < low - slack or extension.max() > high + slack:
        logger.warning(
            "调和延拓违反离散极值原理（网格可能不是 Delaunay 型）",
            boundary_min=low,
            boundary_max=high,
            extension_min=float(extension.min()),
            extension_max=float(extension.max()),
        )
    return extension


def harmonic_residual(sys: SystemMatrices, field: np.ndarray) -> float:
    """节点场在内部自由度上的离散调和残差 ‖(K field)_i‖ / ‖K‖·‖field‖。"""
    field = np.asarray(field, dtype=float)
    scale = max(float(abs(sys.K).sum(axis=1).max()) * float(np.abs(field).max()), 1e-300)
    return float(np.abs(sys.restrict(sys.K @ field)).max()) / scale
