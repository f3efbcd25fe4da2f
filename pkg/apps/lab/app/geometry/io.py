"""网格的纯文本读写格式。

    nv nt nb
    x y interior_flag        （nv 行）
    i j k                    （nt 行）
    len i0 i1 ...            （nb 行，每个边界环一行）
    ni                       （可选：界面环个数）
    len i0 i1 ...            （ni 行）

实数一律以 17 位有效数字输出，读回后逐位相同。
"""

import os
from pathlib import Path

import numpy as np
import structlog

from app.errors import MeshError
from app.fileio import atomic_write_text
from app.geometry.domains import DomainSpec
from app.geometry.mesh import Mesh

logger = structlog.get_logger(__name__)


def _loop_line(loop: np.ndarray) -> str:
    return " ".join(str(int(i)) for i in (len(loop), *loop))


def format_mesh(mesh: Mesh) -> str:
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_loops)}"]
    for (x, y), interior in zip(mesh.vertices, mesh.interior_mask, strict=True):
        lines.append(f"{x:.17g} {y:.17g} {int(interior)}")
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist())
    lines.extend(_loop_line(loop) for loop in mesh.boundary_loops)
    if mesh.interface_loops:
        lines.append(str(len(mesh.interface_loops)))
        lines.extend(_loop_line(loop) for loop in mesh.interface_loops)
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path: str | os.PathLike) -> Path:
    target = atomic_write_text(path, format_mesh(mesh))
    logger.debug("网格已写出", path=str(target), vertices=mesh.n_vertices)
    return target


def _parse_loop(line: str) -> np.ndarray:
    values = [int(v) for v in line.split()]
    if not values or values[0] != len(values) - 1:
        raise MeshError(f"环的长度字段与顶点数不符: {line!r}")
    return np.asarray(values[1:], dtype=np.int64)


def read_mesh(path: str | os.PathLike, spec: DomainSpec | None = None) -> Mesh:
    """
    读取 write_mesh 写出的网格文件，并重新校验全部网格不变量。

    参数:
        path: 文件路径。
        spec: 可选的区域描述，附在网格上供后续细化投影使用。

    返回:
        Mesh: 读回的网格；边界环与内部标记必须与文件记录一致。
    """
    lines = [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    try:
        nv, nt, nb = (int(v) for v in lines[0].split())
        vertex_rows = [line.split() for line in lines[1 : 1 + nv]]
        vertices = np.array([[float(x), float(y)] for x, y, _ in vertex_rows])
        flags = np.array([int(flag) for _, _, flag in vertex_rows], dtype=bool)
        offset = 1 + nv
        triangles = np.array(
            [[int(v) for v in line.split()] for line in lines[offset : offset + nt]],
            dtype=np.int64,
        )
        offset += nt
        loops = [_parse_loop(line) for line in lines[offset : offset + nb]]
        offset += nb
        interfaces: list[np.ndarray] = []
        if offset < len(lines):
            ni = int(lines[offset])
            interfaces = [_parse_loop(line) for line in lines[offset + 1 : offset + 1 + ni]]
    except (ValueError, IndexError) as e:
        raise MeshError(f"无法解析网格文件 {path}: {e}") from e

    mesh = Mesh.from_triangles(vertices, triangles, spec, tuple(interfaces))
    if len(loops) != len(mesh.boundary_loops) or not all(
        np.array_equal(a, b) for a, b in zip(loops, mesh.boundary_loops, strict=True)
    ):
        raise MeshError("文件中的边界环与三角形拓扑不一致")
    if not np.array_equal(flags, mesh.interior_mask):
        raise MeshError("文件中的内部顶点标记与边界环不一致")
    return mesh
