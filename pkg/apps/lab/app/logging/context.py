import uuid
from collections.abc import Iterator
from contextlib import contextmanager

import structlog


@contextmanager
def experiment_context(subcommand: str, config_hash: str | None = None) -> Iterator[str]:
    """
    为一次实验运行注入唯一的运行 ID 以及子命令、配置哈希等上下文。

    在此作用域内的所有日志都会自动携带这些字段，便于把同一次实验的
    网格、特征求解和通量评估日志串起来。退出时恢复为空上下文。

    返回:
        str: 本次运行的 run_id。
    """
    # 清理上下文变量，防止上一次运行的字段泄漏
    structlog.contextvars.clear_contextvars()

    run_id = str(uuid.uuid4())
    structlog.contextvars.bind_contextvars(
        run_id=run_id,
        subcommand=subcommand,
        config_hash=config_hash,
    )
    try:
        yield run_id
    finally:
        structlog.contextvars.clear_contextvars()
