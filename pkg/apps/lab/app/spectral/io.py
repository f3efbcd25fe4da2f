import os
from pathlib import Path

from app.fileio import atomic_write_text
from app.spectral.basis import EigenBasis


def format_eigenbasis(basis: EigenBasis) -> str:
    """每个模态两行：`k lambda alpha`（k 从 1 开始），随后一行节点值。"""
    lines = []
    for k in range(basis.count):
        lines.append(f"{k + 1} {basis.lambdas[k]:.17g} {basis.alphas[k]:.17g}")
        lines.append(" ".join(f"{v:.17g}" for v in basis.modes[:, k].tolist()))
    return "\n".join(lines) + "\n"


def write_eigenbasis(basis: EigenBasis, path: str | os.PathLike) -> Path:
    return atomic_write_text(path, format_eigenbasis(basis))
