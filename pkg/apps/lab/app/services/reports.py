from __future__ import annotations

import csv
import io
import math
import os
from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np

from app import __version__
from app.fileio import atomic_write_text


def format_value(value: object) -> str:
    """浮点数统一用 %.17g，保证同一配置两次运行的 CSV 逐字节一致。"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else f"{value:.17g}"
    if isinstance(value, np.integer):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def format_report(
    metadata: Mapping[str, object],
    columns: Sequence[str],
    rows: Sequence[Sequence[object]],
) -> str:
    """
    `#` 开头的元数据行、表头行与数据行组成的 CSV 文本。

    元数据总是以 tool_version 开头，其余键按给定顺序输出。
    """
    buffer = io.StringIO()
    buffer.write(f"# tool_version={__version__}\n")
    for key, value in metadata.items():
        buffer.write(f"# {key}={format_value(value)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"数据行有 {len(row)} 列，表头有 {len(columns)} 列")
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def write_report(
    path: str | os.PathLike,
    metadata: Mapping[str, object],
    columns: Sequence[str],
    rows: Sequence[Sequence[object]],
) -> Path:
    return atomic_write_text(path, format_report(metadata, columns, rows))


def read_report(path: str | os.PathLike) -> tuple[dict[str, str], list[dict[str, str]]]:
    """读回 write_report 的输出：(元数据, 按表头映射的行)。"""
    metadata: dict[str, str] = {}
    body: list[str] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition("=")
                metadata[key] = value
            else:
                body.append(line)
    return metadata, list(csv.DictReader(body))
