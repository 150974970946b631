import argparse
from pathlib import Path
from typing import List, Optional, Sequence

from errors import EXIT_ACCEPTANCE, EXIT_OK
from models import CommandDescription, ConvergenceRow
from services.chart_service import ChartService
from services.config_service import ConfigService
from services.verification_service import SPATIAL_SHARE_MAX, VerificationService


def _ladder(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"ladder must be comma-separated numbers, got {text!r}") from exc
    if len(values) < 2:
        raise argparse.ArgumentTypeError("ladder needs at least two values")
    return values


def register_convergence_tools(
    subparsers: argparse._SubParsersAction, parents: Sequence[argparse.ArgumentParser]
) -> None:
    """Register the spatial and temporal convergence study commands"""

    CONVERGE_SPACE_DESCRIPTION = CommandDescription(
        description="Run a case on a mesh ladder at fixed dt and report errors and observed spatial rates",
        use_when="When checking the (k+1)th order spatial accuracy of a scheme",
        side_effects="Writes <out>/<case>-space.<fmt>, a .dat plot block and a log-log PNG chart",
    )
    CONVERGE_TIME_DESCRIPTION = CommandDescription(
        description="Run a case on a dt ladder at a fixed mesh and report errors and observed temporal rates",
        use_when="When checking temporal superconvergence (2j-1 with j temporal points) or filtered rates",
        side_effects="Writes <out>/<case>-time.<fmt>, a .dat plot block and a log-log PNG chart",
    )

    for name, desc, handler, ladder_help in (
        ("converge-space", CONVERGE_SPACE_DESCRIPTION, converge_space, "elements per direction (or disk levels)"),
        ("converge-time", CONVERGE_TIME_DESCRIPTION, converge_time, "slab sizes"),
    ):
        parser = subparsers.add_parser(
            name,
            parents=parents,
            help=desc.description,
            description=desc.render(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        parser.add_argument("config", help="case file (dotted key=value lines)")
        parser.add_argument("--ladder", type=_ladder, default=None, help=f"comma-separated {ladder_help}")
        parser.add_argument("--expect-rate", type=float, default=None, help="fail (exit 1) unless the last rate matches")
        parser.add_argument("--rate-tol", type=float, default=0.25, help="tolerance for --expect-rate")
        parser.set_defaults(handler=handler)
        if name == "converge-time":
            parser.add_argument(
                "--precheck", action="store_true", help="rerun the coarsest rung with two more spatial points"
            )


def write_ladder_outputs(rows: List[ConvergenceRow], out: Path, stem: str, fmt: str, xlabel: str) -> List[Path]:
    table = VerificationService.write_table(VerificationService.rows_to_frame(rows), out / f"{stem}.{fmt}", fmt)
    series = {rows[0].case: ([r.param for r in rows], [r.error_l2 for r in rows])}
    dat = ChartService.write_dat(series, out / f"{stem}.dat")
    chart = ChartService.create_convergence_chart(series, out / f"{stem}.png", stem, xlabel=xlabel)
    return [table, dat, chart]


def _report(rows: List[ConvergenceRow], outputs: List[Path], expect: Optional[float], tol: float) -> int:
    for row in rows:
        rate = "-" if row.rate is None else f"{row.rate:.3f}"
        print(f"   {row.refine}: param={row.param:.4g} error={row.error_l2:.6e} rate={rate} [{row.label}]")
    share = rows[0].spatial_share
    if share is not None:
        mark = "✅" if share <= SPATIAL_SHARE_MAX else "⚠️"
        print(f"{mark} spatial share of the coarsest error: {100.0 * share:.2f}% (sp_space + 2 rerun)")
    print(f"   wrote {', '.join(str(p) for p in outputs)}")
    if expect is None:
        print(f"✅ {rows[0].case}: {len(rows)} rungs")
        return EXIT_OK
    last = rows[-1].rate
    if last is not None and abs(last - expect) <= tol:
        print(f"✅ {rows[0].case}: rate {last:.3f} within {tol} of {expect}")
        return EXIT_OK
    print(f"❌ {rows[0].case}: rate {last} outside {tol} of {expect}")
    return EXIT_ACCEPTANCE


async def converge_space(args: argparse.Namespace) -> int:
    case = ConfigService.load_case(args.config)
    print(f"📈 Spatial convergence for {case.case.name}")
    rows = await VerificationService.spatial_convergence(case, args.ladder, args.threads, timings=True)
    outputs = write_ladder_outputs(rows, args.out, f"{case.case.name}-space", args.fmt, "h")
    return _report(rows, outputs, args.expect_rate, args.rate_tol)


async def converge_time(args: argparse.Namespace) -> int:
    case = ConfigService.load_case(args.config)
    print(f"📈 Temporal convergence for {case.case.name}")
    rows = await VerificationService.temporal_convergence(
        case, args.ladder, args.threads, timings=True, precheck=args.precheck
    )
    outputs = write_ladder_outputs(rows, args.out, f"{case.case.name}-time", args.fmt, "dt")
    return _report(rows, outputs, args.expect_rate, args.rate_tol)
