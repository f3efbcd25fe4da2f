import numpy as np
import structlog

from app.errors import MeshError, ParameterError
from app.geometry.mesh import Mesh

logger = structlog.get_logger(__name__)

# |e1 × e2| 低于该相对值的三点视为共线
_COLLINEAR_TOL = 1e-14


def _loop_geometry(mesh: Mesh, loop_index: int):
    if not 0 <= loop_index < len(mesh.boundary_loops):
        raise ParameterError(
            f"边界环下标 {loop_index} 越界（共 {len(mesh.boundary_loops)} 个边界环）"
        )
    loop = mesh.boundary_loops[loop_index]
    if loop.size < 4:
        raise MeshError(f"边界环 {loop_index} 只有 {loop.size} 个顶点，至少需要 4 个")
    p = mesh.vertices[loop]
    incoming = p - np.roll(p, 1, axis=0)
    outgoing = np.roll(p, -1, axis=0) - p
    return loop, incoming, outgoing


def loop_turning_angles(mesh: Mesh, loop_index: int) -> np.ndarray:
    """
    边界环每个顶点处的有向转角（弧度）。

    外边界（逆时针）转角和为 +2π，孔洞边界（顺时针）为 -2π。
    """
    _, incoming, outgoing = _loop_geometry(mesh, loop_index)
    cross = incoming[:, 0] * outgoing[:, 1] - incoming[:, 1] * outgoing[:, 0]
    dot = np.einsum("ij,ij->i", incoming, outgoing)
    return np.arctan2(cross, dot)


def degenerate_vertices(mesh: Mesh, loop_index: int) -> np.ndarray:
    """与前后邻点共线的边界顶点（网格顶点下标）。"""
    loop, incoming, outgoing = _loop_geometry(mesh, loop_index)
    cross = incoming[:, 0] * outgoing[:, 1] - incoming[:, 1] * outgoing[:, 0]
    scale = np.linalg.norm(incoming, axis=1) * np.linalg.norm(outgoing, axis=1)
    return loop[np.abs(cross) <= _COLLINEAR_TOL * scale]


def boundary_curvature(mesh: Mesh, loop_index: int = 0) -> np.ndarray:
    """
    离散曲率：转角除以对偶弧长（相邻两条边长度的平均）。

    符号约定使区域位于曲线内侧时曲率为正（单位圆盘为 +1，圆环内边界为负）。
    共线顶点处曲率取 0，并以警告记录。

    参数:
        mesh: 网格。
        loop_index: 边界环下标，0 为外边界。

    返回:
        np.ndarray: 与 mesh.boundary_loops[loop_index] 对齐的曲率值。
    """
    loop, incoming, outgoing = _loop_geometry(mesh, loop_index)
    turning = loop_turning_angles(mesh, loop_index)
    dual = 0.5 * (np.linalg.norm(incoming, axis=1) + np.linalg.norm(outgoing, axis=1))
    kappa = turning / dual

    degenerate = np.isin(loop, degenerate_vertices(mesh, loop_index))
    if np.any(degenerate):
        kappa[degenerate] = 0.0
        logger.warning(
            "边界环存在共线顶点，曲率置零",
            loop_index=loop_index,
            count=int(degenerate.sum()),
            first_vertex=int(loop[degenerate][0]),
        )
    return kappa


def integrated_curvature(mesh: Mesh, loop_index: int = 0) -> float:
    """∫κ ds 的离散值，光滑单连通区域应接近 2π。"""
    loop, incoming, outgoing = _loop_geometry(mesh, loop_index)
    dual = 0.5 * (np.linalg.norm(incoming, axis=1) + np.linalg.norm(outgoing, axis=1))
    return float(np.sum(boundary_curvature(mesh, loop_index) * dual))
