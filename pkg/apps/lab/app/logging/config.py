import logging
import os
import sys

import structlog
from structlog.types import Processor

# --- 1. 环境配置 ---
# 从环境变量读取配置，如果未设置，则使用默认值。
LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
LOG_FORMATTER: str = os.getenv("LOG_FORMATTER", "console").lower()

# 数值库在大规模求解时会产生大量调试输出，统一压到 WARNING。
_QUIET_LOGGERS = ("asyncio", "shapely")

_configured = False


# --- 2. 主配置函数 ---
def setup_logging(level: str | None = None, formatter: str | None = None) -> None:
    """
    配置 structlog 与标准库 logging，实现控制台/JSON 双模式的结构化日志。

    日志统一写到 stderr：实验命令的 stdout 只保留一行判定结果，
    方便脚本化的验收流程直接解析。重复调用是安全的。

    参数:
        level (str, optional): 覆盖环境变量 LOG_LEVEL。
        formatter (str, optional): 覆盖环境变量 LOG_FORMATTER（"console" 或 "json"）。
    """
    global _configured

    final_level = (level or LOG_LEVEL).upper()
    final_formatter = (formatter or LOG_FORMATTER).lower()

    # --- a. structlog 处理器链，顺序很重要 ---
    shared_processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.stdlib.PositionalArgumentsFormatter(),
    ]

    # --- b. 选择最终渲染器 ---
    final_renderer: Processor
    if final_formatter == "json":
        final_renderer = structlog.processors.JSONRenderer()
    else:
        final_renderer = structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())

    # --- c. 配置 structlog，并桥接到标准库 logging ---
    structlog.configure(
        processors=[
            *shared_processors,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    formatter_obj = structlog.stdlib.ProcessorFormatter(
        # 来自标准库（例如 scipy 的警告转日志）的记录也走同一条处理链。
        foreign_pre_chain=shared_processors,
        processor=final_renderer,
    )

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.setLevel(final_level)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter_obj)
    root_logger.addHandler(handler)

    for logger_name in _QUIET_LOGGERS:
        logging.getLogger(logger_name).setLevel(logging.WARNING)

    # Python warnings（例如 scipy 的 SparseEfficiencyWarning）也进入日志。
    logging.captureWarnings(True)

    if not _configured:
        logger = structlog.get_logger("logging_config")
        logger.debug("日志系统配置完成", formatter=final_formatter, level=final_level)
    _configured = True
