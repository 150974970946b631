import argparse
from typing import List, Sequence, Tuple

import pandas as pd

from errors import EXIT_ACCEPTANCE, EXIT_OK
from models import CommandDescription
from services.config_service import ConfigService
from services.repro_service import FREESTREAM_TOL
from services.verification_service import GCL_TOL, VerificationService

DEFAULT_OFFSETS = [(-1, 0), (0, -1), (0, 0), (1, 1)]


def _pairs(text: str) -> List[Tuple[int, int]]:
    """'1:1,2:2' -> [(1, 1), (2, 2)]"""
    try:
        pairs = [tuple(int(v) for v in item.split(":")) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a:b pairs separated by commas, got {text!r}") from exc
    if not pairs or any(len(p) != 2 for p in pairs):
        raise argparse.ArgumentTypeError(f"expected a:b pairs separated by commas, got {text!r}")
    return [(p[0], p[1]) for p in pairs]


def register_verification_tools(
    subparsers: argparse._SubParsersAction, parents: Sequence[argparse.ArgumentParser]
) -> None:
    """Register the freestream and discrete GCL checks"""

    FREESTREAM_DESCRIPTION = CommandDescription(
        description="Advance a constant state over the whole motion and report the largest deviation",
        use_when="When checking freestream preservation on deforming or moving curvilinear grids",
        side_effects="Writes <out>/<case>-freestream.<fmt>",
    )
    GCL_DESCRIPTION = CommandDescription(
        description="Tabulate discrete GCL residuals of real slabs for a grid of geometry and sampling degrees",
        use_when="When checking which (l, n) and sampling degrees satisfy the discrete metric identities",
        side_effects="Writes <out>/<case>-gcl.<fmt>; under-resolved rows are flagged, not failed",
    )

    parser = subparsers.add_parser(
        "freestream",
        parents=parents,
        help=FREESTREAM_DESCRIPTION.description,
        description=FREESTREAM_DESCRIPTION.render(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("config", help="case file (dotted key=value lines)")
    parser.add_argument("--tol", type=float, default=FREESTREAM_TOL, help="largest accepted deviation")
    parser.set_defaults(handler=freestream)

    parser = subparsers.add_parser(
        "gcl",
        parents=parents,
        help=GCL_DESCRIPTION.description,
        description=GCL_DESCRIPTION.render(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("config", help="case file; its mesh, motion, degrees and dt are used")
    parser.add_argument("--ln", type=_pairs, default=None, help="geometry degrees as l:n pairs, default the case's")
    parser.add_argument(
        "--offsets", type=_pairs, default=DEFAULT_OFFSETS, help="sampling offsets da:db added to (2l, 2n)"
    )
    parser.add_argument("--t-start", type=float, default=None, help="slab start time, default t_end/2")
    parser.add_argument("--tol", type=float, default=GCL_TOL, help="tolerance for resolved rows")
    parser.set_defaults(handler=gcl)


async def freestream(args: argparse.Namespace) -> int:
    case = ConfigService.load_case(args.config)
    print(f"📈 Freestream check for {case.case.name}")
    deviation = VerificationService.freestream_test(case)
    frame = pd.DataFrame([{"case": case.case.name, "deviation": deviation, "tol": args.tol}])
    path = VerificationService.write_table(frame, args.out / f"{case.case.name}-freestream.{args.fmt}", args.fmt)
    print(f"   wrote {path}")
    if deviation <= args.tol:
        print(f"✅ {case.case.name}: max deviation {deviation:.3e}")
        return EXIT_OK
    print(f"❌ {case.case.name}: max deviation {deviation:.3e} exceeds {args.tol:.1e}")
    return EXIT_ACCEPTANCE


async def gcl(args: argparse.Namespace) -> int:
    case = ConfigService.load_case(args.config)
    ln_grid = args.ln or [(case.degrees.l, case.degrees.n)]
    t_start = 0.5 * case.time.t_end if args.t_start is None else args.t_start
    print(f"📈 GCL campaign for {case.case.name} ({case.motion.kind}, slab at t={t_start:g})")
    rows = VerificationService.gcl_campaign(case.motion, ln_grid, args.offsets, case.mesh, t_start, case.time.dt, args.tol)
    path = VerificationService.write_table(
        VerificationService.gcl_to_frame(rows), args.out / f"{case.case.name}-gcl.{args.fmt}", args.fmt
    )
    for row in rows:
        mark = "flagged" if row.flagged else ("ok" if row.within_tol else "FAIL")
        worst = max(row.res_time, row.res_x, row.res_y)
        print(f"   l={row.l} n={row.n} alpha={row.alpha} beta={row.beta}: {worst:.3e} {mark}")
    print(f"   wrote {path}")
    failed = [row for row in rows if not row.passed]
    if failed:
        print(f"❌ {len(failed)} resolved rows exceed {args.tol:.1e}")
        return EXIT_ACCEPTANCE
    print(f"✅ {len(rows)} rows, every resolved row within {args.tol:.1e}")
    return EXIT_OK
