import argparse
from typing import Sequence

from errors import EXIT_ACCEPTANCE, EXIT_OK
from models import CommandDescription
from services.repro_service import ReproOptions, ReproService


def register_repro_tools(subparsers: argparse._SubParsersAction, parents: Sequence[argparse.ArgumentParser]) -> None:
    """Register the canned reproduction campaigns"""

    REPRO_DESCRIPTION = CommandDescription(
        description="Run a canned campaign by figure id and check it against its acceptance thresholds",
        use_when="When reproducing the convergence, freestream, GCL, filter and IRK results at desk scale",
        side_effects=(
            "Writes tables, .dat blocks and PNG charts under --out; exits 1 when a threshold is missed. "
            f"Figure ids: {', '.join(ReproService.figure_ids())}, all"
        ),
    )

    parser = subparsers.add_parser(
        "repro",
        parents=parents,
        help=REPRO_DESCRIPTION.description,
        description=REPRO_DESCRIPTION.render(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("figure", help="figure id, or 'all'")
    parser.add_argument("--full", action="store_true", help="add the higher orders and finer rungs")
    parser.add_argument("--timings", action="store_true", help="fill the wall_ms column (output is then not byte-stable)")
    parser.set_defaults(handler=repro)


async def repro(args: argparse.Namespace) -> int:
    options = ReproOptions(
        out_dir=args.out, threads=args.threads, seed=args.seed, full=args.full, timings=args.timings, fmt=args.fmt
    )
    outcomes = await ReproService.run(args.figure, options)
    failed = 0
    for outcome in outcomes:
        tag = "qualitative" if outcome.qualitative else ("passed" if outcome.passed else "FAILED")
        icon = "✅" if outcome.passed else "❌"
        print(f"{icon} {outcome.figure}: {tag}")
        for message in outcome.messages:
            print(f"   {message}")
        for output in outcome.outputs:
            print(f"   wrote {output}")
        failed += not outcome.passed
    if failed:
        print(f"❌ {failed} of {len(outcomes)} campaigns missed their thresholds")
        return EXIT_ACCEPTANCE
    return EXIT_OK
