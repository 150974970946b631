import argparse
import asyncio
from typing import Sequence

import pandas as pd

from errors import EXIT_OK
from models import CommandDescription, ConvergenceRow
from services.config_service import ConfigService
from services.geometry_service import GeometryService
from services.verification_service import VerificationService


def register_run_tools(subparsers: argparse._SubParsersAction, parents: Sequence[argparse.ArgumentParser]) -> None:
    """Register the single-case run command"""

    RUN_DESCRIPTION = CommandDescription(
        description="Advance one case from t=0 to time.t_end slab by slab and report the L2 error at the final time",
        use_when="When a single configuration needs to be solved, checked against its exact solution or timed",
        side_effects="Writes <out>/<case>.<fmt> (one table row) and <out>/<case>-slabs.<fmt> (per-slab solver reports)",
    )

    parser = subparsers.add_parser(
        "run",
        parents=parents,
        help=RUN_DESCRIPTION.description,
        description=RUN_DESCRIPTION.render(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("config", help="case file (dotted key=value lines)")
    parser.set_defaults(handler=run_case)


async def run_case(args: argparse.Namespace) -> int:
    case = ConfigService.load_case(args.config)
    print(f"📈 Running {case.case.name}")
    error, result, wall = await asyncio.to_thread(VerificationService.run_case, case)

    label = GeometryService.classify_scheme(
        case.k, case.m, case.degrees.l, case.degrees.n, case.solver.sp_space, case.solver.sp_time
    ).label
    row = ConvergenceRow(
        case=case.case.name,
        refine=0,
        param=result.mesh.size,
        error_l2=error,
        label=label.value,
        iters=result.iterations,
        residual=result.final_residual,
        wall_ms=wall,
    )
    table = VerificationService.write_table(
        VerificationService.rows_to_frame([row]), args.out / f"{case.case.name}.{args.fmt}", args.fmt
    )

    slabs = pd.DataFrame(
        [
            {
                "slab": report.slab,
                "t_end": result.trace_times[report.slab + 1],
                "iters": report.iterations,
                "initial_residual": report.initial_residual,
                "final_residual": report.final_residual,
                "converged": report.converged,
                "integral": float(result.integrals[report.slab + 1][0]),
            }
            for report in result.reports
        ],
        columns=["slab", "t_end", "iters", "initial_residual", "final_residual", "converged", "integral"],
    )
    slab_table = VerificationService.write_table(slabs, args.out / f"{case.case.name}-slabs.{args.fmt}", args.fmt)

    if not result.reports:
        print("ℹ️  t_end = 0: reporting the initial-state error only")
    print(f"✅ {case.case.name}: L2 error {error:.6e} at t={result.trace_times[-1]:g} ({result.iterations} iterations)")
    print(f"   wrote {table} and {slab_table}")
    return EXIT_OK
