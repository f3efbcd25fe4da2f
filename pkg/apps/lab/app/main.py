import argparse
import asyncio
import sys

import structlog

from app import __version__
from app.errors import ConfigError, LabError, ParameterError
from app.logging.config import setup_logging
from app.logging.context import experiment_context
from app.services.config import apply_overrides, load_config
from app.services.experiments import SUBCOMMANDS, ExperimentRunner

logger = structlog.get_logger(__name__)

EXIT_INVALID = 2

_DESCRIPTIONS = {
    "mesh": "生成网格并写出 mesh.txt",
    "eigs": "计算 Dirichlet 特征基并写出 eigs.txt",
    "flux": "离散时间序列上的常通量检查",
    "serrin": "扭转函数与 Serrin 通量检查",
    "heatcontent": "短时热含量拟合与几何系数比较",
    "interior": "内部界面上的迹条件与通量条件",
    "sphereband": "球面纬带/极冠的常通量性质",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rigidity-lab",
        description="离散时间热流超定问题的数值刚性实验。",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI 格式的实验配置文件")
    common.add_argument("--out", metavar="DIR", help="输出目录（覆盖配置中的 output_dir）")
    common.add_argument("--refine", metavar="N", type=int, help="网格加密次数")
    common.add_argument("--modes", metavar="K", type=int, help="特征模态数")
    common.add_argument("--threshold", metavar="X", type=float, help="判定阈值（缺省自动）")
    common.add_argument("--seed", metavar="S", type=int, help="随机测试函数的种子")

    subparsers = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        subparsers.add_parser(name, parents=[common], help=_DESCRIPTIONS[name])
    return parser


async def run_experiment(args: argparse.Namespace) -> int:
    config = apply_overrides(
        load_config(args.config),
        output_dir=args.out,
        refine=args.refine,
        modes=args.modes,
        threshold=args.threshold,
        seed=args.seed,
    )
    with experiment_context(args.subcommand, config.config_hash):
        logger.info("开始实验", config=config.canonical())
        outcome = await ExperimentRunner(config).run(args.subcommand)
    print(outcome.line, flush=True)
    return outcome.exit_code


def main(argv: list[str] | None = None) -> int:
    """
    命令行入口。

    返回:
        int: 0 通过，1 判定失败，2 配置无效、截断受限或其他错误。
    """
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return asyncio.run(run_experiment(args))
    except (ConfigError, ParameterError) as e:
        logger.error("配置或参数无效", error=str(e))
        print(f"{args.subcommand}: INVALID {e}", flush=True)
        return EXIT_INVALID
    except LabError as e:
        logger.error("实验失败", exc_info=e)
        print(f"{args.subcommand}: ERROR {e}", flush=True)
        return EXIT_INVALID
    except Exception as e:
        logger.error("发生未预期的错误", exc_info=e)
        print(f"{args.subcommand}: ERROR {e}", flush=True)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
