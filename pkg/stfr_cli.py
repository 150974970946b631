import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from errors import EXIT_USAGE, ConfigurationError, STFRError
from tools.convergence_tools import register_convergence_tools
from tools.repro_tools import register_repro_tools
from tools.run_tools import register_run_tools
from tools.verification_tools import register_verification_tools

logger = logging.getLogger("stfr")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _add_global_flags(parser: argparse.ArgumentParser, defaults: bool) -> None:
    # subcommand copies use SUPPRESS so they only override when given
    def default(value: object) -> object:
        return value if defaults else argparse.SUPPRESS

    parser.add_argument(
        "--out", type=Path, default=default(Path(os.environ.get("STFR_OUT_DIR", "results"))), help="output directory"
    )
    parser.add_argument(
        "--threads",
        type=_positive_int,
        default=default(int(os.environ.get("STFR_THREADS", "1"))),
        help="concurrent ladder rungs (1 = reproducible mode)",
    )
    parser.add_argument("--seed", type=_seed, default=default(0), help="seed for randomized property campaigns")
    parser.add_argument(
        "--format",
        dest="fmt",
        choices=["csv", "tsv"],
        default=default(os.environ.get("STFR_FORMAT", "csv")),
        help="table format",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stfr",
        description="Space-time flux reconstruction on moving curvilinear grids: solver runs and verification campaigns",
    )
    _add_global_flags(parser, defaults=True)
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, defaults=False)

    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    register_run_tools(subparsers, [common])
    register_convergence_tools(subparsers, [common])
    register_verification_tools(subparsers, [common])
    register_repro_tools(subparsers, [common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=os.environ.get("STFR_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    logger.debug("command %s, output in %s, %d thread(s)", args.command, args.out, args.threads)
    try:
        return asyncio.run(args.handler(args))
    except ConfigurationError as e:
        print(f"❌ {e}")
        return e.exit_code
    except STFRError as e:
        print(f"❌ {type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        print("\n👋 Stopped by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
