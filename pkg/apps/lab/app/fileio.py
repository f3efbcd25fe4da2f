import os
import tempfile
from pathlib import Path


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """先写入同目录下的临时文件再原子替换，读者不会看到写了一半的文件。"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        "w",
        dir=target.parent,
        prefix=f".{target.name}.",
        suffix=".tmp",
        delete=False,
        encoding="utf-8",
        newline="\n",
    ) as handle:
        handle.write(text)
        tmp_name = handle.name
    try:
        os.replace(tmp_name, target)
    except OSError:
        os.unlink(tmp_name)
        raise
    return target
