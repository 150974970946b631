import logging
import math
from pathlib import Path
from typing import Any, Awaitable, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from errors import UnsupportedCaseError
from models import CaseConfig, ConvergenceRow, MeshSettings, MotionLaw, ReproOutcome
from services.basis_service import BasisService
from services.chart_service import ChartService
from services.mesh_service import MeshService
from services.solver_service import SolverService
from services.verification_service import SPATIAL_SHARE_MAX, VerificationService

logger = logging.getLogger(__name__)

FREESTREAM_TOL = 1e-10
PROPERTY_TOL = 1e-12
IRK_TOL = 1e-9
UNDER_RESOLVED_MIN = 1e-6
FILTER_THETAS = (0.0, 0.3, 0.9, 1.0)
MILD_FILTER_THETA = math.sqrt(0.99)
MILD_FILTER_CHANGE = 0.1


class ReproOptions(BaseModel):
    out_dir: Path = Path("results")
    threads: int = 1
    seed: int = 0
    full: bool = False
    timings: bool = False
    fmt: str = "csv"


def make_case(name: str, **sections: Dict[str, Any]) -> CaseConfig:
    return CaseConfig.model_validate({"case": {"name": name}, **sections})


class ReproService:
    """Service for the canned reproduction campaigns and their acceptance checks"""

    @classmethod
    def figure_ids(cls) -> List[str]:
        return list(cls._registry())

    @classmethod
    def _registry(cls) -> Dict[str, Callable[[ReproOptions], Awaitable[ReproOutcome]]]:
        return {
            "fig-1d-spatial": cls.fig_1d_spatial,
            "fig-1d-temporal": cls.fig_1d_temporal,
            "fig-euler-spatial": cls.fig_euler_spatial,
            "fig-euler-temporal": cls.fig_euler_temporal,
            "fig-freestream": cls.fig_freestream,
            "fig-gcl": cls.fig_gcl,
            "check-filter-energy": cls.check_filter_energy,
            "check-projection": cls.check_projection,
            "check-irk": cls.check_irk,
            "fig-deform-spatial": cls.fig_deform_spatial,
            "fig-deform-temporal": cls.fig_deform_temporal,
            "fig-filter-rates": cls.fig_filter_rates,
            "fig-filter-theta": cls.fig_filter_theta,
            "fig-disk-spatial": cls.fig_disk_spatial,
            "fig-disk-temporal": cls.fig_disk_temporal,
            "fig-disk-trajectory": cls.fig_disk_trajectory,
        }

    @classmethod
    async def run(cls, figure: str, options: ReproOptions) -> List[ReproOutcome]:
        registry = cls._registry()
        if figure == "all":
            return [await runner(options) for runner in registry.values()]
        if figure not in registry:
            raise UnsupportedCaseError(f"unknown figure id {figure!r}; known: {', '.join(registry)}")
        return [await registry[figure](options)]

    # ------------------------------------------------------------ helpers

    @staticmethod
    def _check_rate(rows: Sequence[ConvergenceRow], expected: float, tol: float, rung: int = -1) -> tuple[bool, str]:
        rate = rows[rung].rate
        ok = rate is not None and abs(rate - expected) <= tol
        shown = "n/a" if rate is None else f"{rate:.3f}"
        return ok, f"{rows[0].case}: rate {shown} (expected {expected} +/- {tol})"

    @staticmethod
    def _check_share(rows: Sequence[ConvergenceRow]) -> tuple[bool, str]:
        share = rows[0].spatial_share
        if share is None:
            return False, f"{rows[0].case}: spatial share not measured"
        return share <= SPATIAL_SHARE_MAX, f"{rows[0].case}: spatial share {100.0 * share:.2f}% of coarsest error"

    @classmethod
    def _write_ladders(
        cls, figure: str, ladders: Dict[str, List[ConvergenceRow]], options: ReproOptions, xlabel: str
    ) -> List[str]:
        rows = [row for ladder in ladders.values() for row in ladder]
        table = VerificationService.write_table(
            VerificationService.rows_to_frame(rows), options.out_dir / f"{figure}.{options.fmt}", options.fmt
        )
        series = {name: ([r.param for r in ladder], [r.error_l2 for r in ladder]) for name, ladder in ladders.items()}
        dat = ChartService.write_dat(series, options.out_dir / f"{figure}.dat")
        chart = ChartService.create_convergence_chart(series, options.out_dir / f"{figure}.png", figure, xlabel=xlabel)
        return [str(table), str(dat), str(chart)]

    @classmethod
    def _outcome(
        cls, figure: str, checks: List[tuple[bool, str]], outputs: List[str], qualitative: bool = False
    ) -> ReproOutcome:
        outcome = ReproOutcome(
            figure=figure,
            passed=all(ok for ok, _ in checks),
            qualitative=qualitative,
            messages=[("ok   " if ok else "FAIL ") + msg for ok, msg in checks],
            outputs=outputs,
        )
        logger.info("%s: %s", figure, "passed" if outcome.passed else "failed")
        return outcome

    # ------------------------------------------------------------ convergence figures

    @classmethod
    async def fig_1d_spatial(cls, options: ReproOptions) -> ReproOutcome:
        orders = [2, 3, 4, 5] if options.full else [2, 3, 4]
        ladder = [16, 32, 64, 128]
        ladders, checks = {}, []
        for sp in orders:
            case = make_case(
                f"adv1d-space-sp{sp}",
                law={"kind": "advection1d", "velocity": (1.0, 0.0)},
                mesh={"kind": "square", "nx": ladder[0], "ny": 1},
                time={"t_end": 0.5, "dt": 0.125},
                solver={"sp_space": sp, "sp_time": 7},
            )
            rows = await VerificationService.spatial_convergence(case, ladder, options.threads, options.timings)
            ladders[case.case.name] = rows
            checks.append(cls._check_rate(rows, sp, 0.25))
        return cls._outcome("fig-1d-spatial", checks, cls._write_ladders("fig-1d-spatial", ladders, options, "h"))

    @classmethod
    async def fig_1d_temporal(cls, options: ReproOptions) -> ReproOutcome:
        ladder = [0.125, 0.0625, 0.03125, 0.015625]
        ladders, checks = {}, []
        for sp in (2, 3):
            case = make_case(
                f"adv1d-time-sp{sp}",
                law={"kind": "advection1d", "velocity": (1.0, 0.0)},
                mesh={"kind": "square", "nx": 16, "ny": 1},
                time={"t_end": 0.5, "dt": ladder[0]},
                solver={"sp_space": 8, "sp_time": sp},
            )
            rows = await VerificationService.temporal_convergence(
                case, ladder, options.threads, options.timings, precheck=True
            )
            ladders[case.case.name] = rows
            checks.append(cls._check_rate(rows, 2 * sp - 1, 0.4))
            checks.append(cls._check_share(rows))
        return cls._outcome("fig-1d-temporal", checks, cls._write_ladders("fig-1d-temporal", ladders, options, "dt"))

    @classmethod
    async def fig_euler_spatial(cls, options: ReproOptions) -> ReproOutcome:
        orders = [3, 4] if options.full else [3]
        ladder = [8, 16, 32]
        ladders, checks = {}, []
        for sp in orders:
            case = make_case(
                f"vortex-space-sp{sp}",
                law={"kind": "euler2d", "gamma": 1.4},
                mesh={"kind": "square", "nx": 8, "ny": 8, "lx": 10.0, "ly": 10.0},
                initial={"kind": "vortex"},
                time={"t_end": 0.5, "dt": 0.125},
                solver={"sp_space": sp, "sp_time": 4},
            )
            rows = await VerificationService.spatial_convergence(case, ladder, options.threads, options.timings)
            ladders[case.case.name] = rows
            checks.append(cls._check_rate(rows, sp, 0.35))
        return cls._outcome(
            "fig-euler-spatial", checks, cls._write_ladders("fig-euler-spatial", ladders, options, "h")
        )

    @classmethod
    async def fig_deform_temporal(cls, options: ReproOptions) -> ReproOutcome:
        ladder = [0.1, 0.05, 0.025, 0.0125]
        ladders, checks = {}, []
        for sp in (2, 3):
            case = make_case(
                f"deform-time-sp{sp}",
                law={"kind": "advection2d", "velocity": (1.0, 1.0)},
                mesh={"kind": "square", "nx": 8, "ny": 8},
                motion={"kind": "sym_deform"},
                degrees={"l": 2, "n": 2},
                initial={"kind": "wave", "wavenumber": (1.0, 1.0)},
                time={"t_end": 0.2, "dt": ladder[0]},
                solver={"sp_space": 7, "sp_time": sp},
            )
            rows = await VerificationService.temporal_convergence(case, ladder, options.threads, options.timings)
            ladders[case.case.name] = rows
            checks.append(cls._check_rate(rows, 2 * sp - 1, 0.5, rung=1))
        return cls._outcome(
            "fig-deform-temporal", checks, cls._write_ladders("fig-deform-temporal", ladders, options, "dt")
        )

    @classmethod
    async def fig_filter_rates(cls, options: ReproOptions) -> ReproOutcome:
        theta = math.sqrt(0.9)
        space_case = make_case(
            "adv1d-filter-space",
            law={"kind": "advection1d"},
            mesh={"kind": "square", "nx": 8, "ny": 1},
            time={"t_end": 0.5, "dt": 0.125},
            solver={"sp_space": 4, "sp_time": 7, "filter": {"space_points": 3, "theta": theta}},
        )
        time_ladder = [0.125, 0.0625, 0.03125, 0.015625]
        time_case = make_case(
            "adv1d-filter-time",
            law={"kind": "advection1d"},
            mesh={"kind": "square", "nx": 16, "ny": 1},
            time={"t_end": 0.5, "dt": time_ladder[0]},
            solver={"sp_space": 8, "sp_time": 3, "filter": {"time_points": 2, "theta": theta}},
        )
        space_rows = await VerificationService.spatial_convergence(
            space_case, [8, 16, 32], options.threads, options.timings
        )
        time_rows = await VerificationService.temporal_convergence(
            time_case, time_ladder, options.threads, options.timings
        )
        checks = [cls._check_rate(space_rows, 3, 0.3), cls._check_rate(time_rows, 1, 0.4)]
        outputs = cls._write_ladders(
            "fig-filter-rates", {space_case.case.name: space_rows, time_case.case.name: time_rows}, options, "h / dt"
        )
        return cls._outcome("fig-filter-rates", checks, outputs)

    @classmethod
    async def fig_deform_spatial(cls, options: ReproOptions, ladder: Optional[Sequence[int]] = None) -> ReproOutcome:
        orders = [3, 4, 5, 6] if options.full else [3, 4]
        ladder = list(ladder or ([4, 8, 16, 32] if options.full else [4, 8, 16]))
        ladders, checks = {}, []
        for degree in (1, 2):
            for sp in orders:
                case = make_case(
                    f"deform-space-l{degree}-sp{sp}",
                    law={"kind": "advection2d", "velocity": (1.0, 1.0)},
                    mesh={"kind": "square", "nx": ladder[0], "ny": ladder[0]},
                    motion={"kind": "sym_deform"},
                    degrees={"l": degree, "n": degree},
                    initial={"kind": "wave", "wavenumber": (1.0, 1.0)},
                    time={"t_end": 0.1, "dt": 0.05},
                    solver={"sp_space": sp, "sp_time": 5},
                )
                rows = await VerificationService.spatial_convergence(case, ladder, options.threads, options.timings)
                ladders[case.case.name] = rows
                if rows[0].label == "V":
                    checks.append((True, f"{case.case.name}: V-labelled, final rate {rows[-1].rate}"))
                else:
                    checks.append(cls._check_rate(rows, sp, 0.5))
        return cls._outcome(
            "fig-deform-spatial", checks, cls._write_ladders("fig-deform-spatial", ladders, options, "h")
        )

    @classmethod
    async def fig_disk_spatial(cls, options: ReproOptions, ladder: Optional[Sequence[int]] = None) -> ReproOutcome:
        orders = [5, 6] if options.full else [5]
        ladder = list(ladder or [1, 2, 3])
        ladders, checks = {}, []
        for sp in orders:
            case = make_case(
                f"disk-space-sp{sp}",
                law={"kind": "advection2d", "velocity": (1.0, 1.0)},
                mesh={"kind": "disk", "levels": ladder[0], "boundary": "analytic"},
                motion={"kind": "circular"},
                degrees={"l": 2, "n": 2},
                initial={"kind": "wave", "wavenumber": (1.0, 1.0)},
                time={"t_end": 0.2, "dt": 0.1},
                solver={"sp_space": sp, "sp_time": 5},
            )
            rows = await VerificationService.spatial_convergence(case, ladder, options.threads, options.timings)
            ladders[case.case.name] = rows
            checks.append(cls._check_rate(rows, sp, 0.6))
        return cls._outcome("fig-disk-spatial", checks, cls._write_ladders("fig-disk-spatial", ladders, options, "h"))

    @classmethod
    async def fig_filter_theta(cls, options: ReproOptions, ladder: Optional[Sequence[int]] = None) -> ReproOutcome:
        """Spatial filter strength sweep on the deforming square: sp_space 4 filtered towards 3 points"""
        ladder = list(ladder or [8, 16, 32])
        ladders, checks = {}, []
        errors: Dict[float, float] = {}
        for theta in sorted({*FILTER_THETAS, MILD_FILTER_THETA}, reverse=True):
            case = make_case(
                f"deform-filter-theta{theta:.3f}",
                law={"kind": "advection2d", "velocity": (1.0, 1.0)},
                mesh={"kind": "square", "nx": ladder[0], "ny": ladder[0]},
                motion={"kind": "sym_deform"},
                degrees={"l": 1, "n": 1},
                initial={"kind": "wave", "wavenumber": (1.0, 1.0)},
                time={"t_end": 0.1, "dt": 0.05},
                solver={"sp_space": 4, "sp_time": 5, "filter": {"space_points": 3, "theta": theta}},
            )
            rows = await VerificationService.spatial_convergence(case, ladder, options.threads, options.timings)
            ladders[case.case.name] = rows
            errors[theta] = rows[-1].error_l2
            if theta == 1.0:
                checks.append(cls._check_rate(rows, 3.5, 0.75))
            elif theta == MILD_FILTER_THETA:
                change = abs(errors[theta] - errors[1.0]) / max(errors[1.0], 1e-300)
                checks.append(
                    (change <= MILD_FILTER_CHANGE, f"{case.case.name}: finest error changed by {100.0 * change:.2f}%")
                )
            else:
                checks.append(cls._check_rate(rows, 3, 0.4))
        return cls._outcome(
            "fig-filter-theta", checks, cls._write_ladders("fig-filter-theta", ladders, options, "h")
        )

    @classmethod
    async def fig_euler_temporal(cls, options: ReproOptions, ladder: Optional[Sequence[float]] = None) -> ReproOutcome:
        orders = [2, 3] if options.full else [2]
        ladder = list(ladder or [0.5, 0.25, 0.125])
        ladders, checks = {}, []
        for sp in orders:
            case = make_case(
                f"vortex-time-sp{sp}",
                law={"kind": "euler2d", "gamma": 1.4},
                mesh={"kind": "square", "nx": 16, "ny": 16, "lx": 10.0, "ly": 10.0},
                initial={"kind": "vortex"},
                time={"t_end": 1.0, "dt": ladder[0]},
                solver={"sp_space": 5, "sp_time": sp},
            )
            rows = await VerificationService.temporal_convergence(
                case, ladder, options.threads, options.timings, precheck=True
            )
            ladders[case.case.name] = rows
            checks.append(cls._check_rate(rows, 2 * sp - 1, 0.5))
            checks.append(cls._check_share(rows))
        return cls._outcome(
            "fig-euler-temporal", checks, cls._write_ladders("fig-euler-temporal", ladders, options, "dt")
        )

    @classmethod
    async def fig_disk_temporal(cls, options: ReproOptions) -> ReproOutcome:
        ladder = [0.2, 0.1, 0.05]
        ladders, checks = {}, []
        for n in (1, 2):
            for sp in (2, 3):
                case = make_case(
                    f"disk-time-n{n}-sp{sp}",
                    law={"kind": "advection2d", "velocity": (1.0, 1.0)},
                    mesh={"kind": "disk", "levels": 1, "boundary": "analytic"},
                    motion={"kind": "circular"},
                    degrees={"l": 2, "n": n},
                    initial={"kind": "wave", "wavenumber": (1.0, 1.0)},
                    time={"t_end": 0.4, "dt": ladder[0]},
                    solver={"sp_space": 5, "sp_time": sp},
                )
                rows = await VerificationService.temporal_convergence(case, ladder, options.threads, options.timings)
                ladders[case.case.name] = rows
                checks.append((True, f"{case.case.name}: final rate {rows[-1].rate}"))
        outputs = cls._write_ladders("fig-disk-temporal", ladders, options, "dt")
        return cls._outcome("fig-disk-temporal", checks, outputs, qualitative=True)

    @classmethod
    async def fig_disk_trajectory(cls, options: ReproOptions) -> ReproOutcome:
        motion = MotionLaw(kind="circular")
        ref = (0.35, 0.2)
        t_fine = np.linspace(0.0, 1.0, 401)
        exact = np.array([MeshService.move(motion, np.array([ref]), float(t))[0] for t in t_fine])
        series = {"exact": (exact[:, 0], exact[:, 1])}
        checks = []
        for n in (1, 2):
            for dt in (0.5, 0.25, 0.125):
                t, x, y = MeshService.trajectory(motion, ref, dt, n, 1.0)
                reference = np.array([MeshService.move(motion, np.array([ref]), float(s))[0] for s in t])
                gap = float(np.max(np.hypot(x - reference[:, 0], y - reference[:, 1])))
                name = f"n={n} dt={dt}"
                series[name] = (x, y)
                checks.append((True, f"{name}: max path deviation {gap:.3e}"))
        dat = ChartService.write_dat(series, options.out_dir / "fig-disk-trajectory.dat")
        chart = ChartService.create_trajectory_chart(
            series, options.out_dir / "fig-disk-trajectory.png", "Disk point trajectory"
        )
        return cls._outcome("fig-disk-trajectory", checks, [str(dat), str(chart)], qualitative=True)

    # ------------------------------------------------------------ invariant campaigns

    @classmethod
    async def fig_freestream(cls, options: ReproOptions) -> ReproOutcome:
        common = {"initial": {"kind": "constant"}, "solver": {"sp_space": 3, "sp_time": 3}}
        cases = [
            make_case(
                "freestream-square-linear",
                law={"kind": "advection2d", "velocity": (1.0, 1.0)},
                mesh={"kind": "square", "nx": 4, "ny": 4},
                motion={"kind": "sym_deform"},
                degrees={"l": 1, "n": 1},
                time={"t_end": 0.2, "dt": 0.05},
                **common,
            ),
            make_case(
                "freestream-square-quadratic",
                law={"kind": "advection2d", "velocity": (1.0, 1.0)},
                mesh={"kind": "square", "nx": 4, "ny": 4},
                motion={"kind": "sym_deform"},
                degrees={"l": 2, "n": 2},
                time={"t_end": 0.2, "dt": 0.05},
                **common,
            ),
            make_case(
                "freestream-square-euler",
                law={"kind": "euler2d"},
                mesh={"kind": "square", "nx": 4, "ny": 4},
                motion={"kind": "sym_deform"},
                degrees={"l": 2, "n": 2},
                time={"t_end": 0.2, "dt": 0.05},
                **common,
            ),
            make_case(
                "freestream-disk-quadratic",
                law={"kind": "advection2d", "velocity": (1.0, 1.0)},
                mesh={"kind": "disk", "levels": 1, "boundary": "analytic"},
                motion={"kind": "circular"},
                degrees={"l": 2, "n": 2},
                time={"t_end": 1.0, "dt": 0.25},
                **common,
            ),
        ]
        records, checks = [], []
        for case in cases:
            deviation = VerificationService.freestream_test(case)
            records.append({"case": case.case.name, "deviation": deviation})
            checks.append((deviation <= FREESTREAM_TOL, f"{case.case.name}: deviation {deviation:.3e}"))
        path = VerificationService.write_table(
            pd.DataFrame(records), options.out_dir / f"fig-freestream.{options.fmt}", options.fmt
        )
        return cls._outcome("fig-freestream", checks, [str(path)])

    @classmethod
    async def fig_gcl(cls, options: ReproOptions) -> ReproOutcome:
        ln_grid = [(1, 1), (1, 2), (2, 1), (2, 2)]
        offsets = [(-1, 0), (0, -1), (0, 0), (1, 1)]
        square = MeshSettings(kind="square", nx=4, ny=4)
        campaigns = {
            "square-stationary": VerificationService.gcl_campaign(MotionLaw(), [(1, 1)], [(0, 0)], square, 0.0, 0.1),
            "square-deform": VerificationService.gcl_campaign(
                MotionLaw(kind="sym_deform"), ln_grid, offsets, square, 0.05, 0.1
            ),
            "disk-circular": VerificationService.gcl_campaign(
                MotionLaw(kind="circular"),
                ln_grid,
                offsets,
                MeshSettings(kind="disk", levels=1, boundary="analytic"),
                0.5,
                0.5,
            ),
        }
        frames, checks = [], []
        for name, rows in campaigns.items():
            frame = VerificationService.gcl_to_frame(rows)
            frame.insert(0, "case", name)
            frames.append(frame)
            bad = [r for r in rows if not r.passed]
            checks.append((not bad, f"{name}: {len(bad)} resolved samples above tolerance"))
            flagged = [max(r.res_time, r.res_x, r.res_y) for r in rows if r.flagged]
            if flagged:
                checks.append(
                    (
                        max(flagged) > UNDER_RESOLVED_MIN,
                        f"{name}: largest under-resolved residual {max(flagged):.3e}",
                    )
                )
        path = VerificationService.write_table(
            pd.concat(frames, ignore_index=True), options.out_dir / f"fig-gcl.{options.fmt}", options.fmt
        )
        return cls._outcome("fig-gcl", checks, [str(path)])

    @classmethod
    async def check_filter_energy(cls, options: ReproOptions, trials: int = 100) -> ReproOutcome:
        rng = np.random.default_rng(options.seed)
        worst = 0.0
        for _ in range(trials):
            hs, ht = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            pair = BasisService.projection_pair(hs, ht, int(rng.integers(1, hs)), int(rng.integers(1, ht)))
            values = rng.standard_normal((hs, hs, ht))
            base = BasisService.difference_energy(values, pair)
            for theta in FILTER_THETAS:
                filtered = BasisService.difference_energy(BasisService.filter_field(values, pair, theta), pair)
                worst = max(worst, abs(filtered - theta**2 * base) / max(base, 1e-300))
        return cls._outcome(
            "check-filter-energy", [(worst <= PROPERTY_TOL, f"worst relative energy mismatch {worst:.3e}")], []
        )

    @classmethod
    async def check_projection(cls, options: ReproOptions, trials: int = 100) -> ReproOutcome:
        rng = np.random.default_rng(options.seed)
        worst_proj = worst_eval = 0.0
        for _ in range(trials):
            hs, ht = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            ls, lt = int(rng.integers(1, hs)), int(rng.integers(1, ht))
            pair = BasisService.projection_pair(hs, ht, ls, lt)
            values = rng.standard_normal((hs, hs, ht))
            low = BasisService.project_field(values, pair)
            oracle = VerificationService.dense_projection(values, hs, ht, ls, lt)
            worst_proj = max(worst_proj, float(np.max(np.abs(low - oracle))))

            theta = float(rng.uniform())
            pts = rng.uniform(-1.0, 1.0, size=(3, 4))
            high_nodes, high_time = pair.high_space.points, pair.high_time.points
            filtered = BasisService.filter_field(values, pair, theta)
            via_high = BasisService.interpolate_tensor(filtered, high_nodes, high_time, *pts)
            low_eval = BasisService.interpolate_tensor(low, pair.low_space.points, pair.low_time.points, *pts)
            high_eval = BasisService.interpolate_tensor(values, high_nodes, high_time, *pts)
            via_low = low_eval + theta * (high_eval - low_eval)
            worst_eval = max(worst_eval, float(np.max(np.abs(via_high - via_low))))
        checks = [
            (worst_proj <= PROPERTY_TOL, f"projection vs mass-matrix oracle {worst_proj:.3e}"),
            (worst_eval <= PROPERTY_TOL, f"filtered evaluation, high vs low space {worst_eval:.3e}"),
        ]
        return cls._outcome("check-projection", checks, [])

    @classmethod
    async def check_irk(cls, options: ReproOptions) -> ReproOutcome:
        checks = []
        for sp_time in (2, 3):
            gap = cls.irk_gap(sp_space=3, sp_time=sp_time, dt=0.1)
            checks.append((gap <= IRK_TOL, f"sp_time={sp_time}: solver vs DG-Gauss IRK {gap:.3e}"))
        return cls._outcome("check-irk", checks, [])

    @staticmethod
    def irk_gap(sp_space: int, sp_time: int, dt: float) -> float:
        """Max difference between one solver slab and the dense IRK step on a periodic element"""
        case = make_case(
            f"irk-sp{sp_time}",
            law={"kind": "advection1d", "velocity": (1.0, 0.0)},
            mesh={"kind": "square", "nx": 1, "ny": 1},
            time={"t_end": dt, "dt": dt},
            solver={"sp_space": sp_space, "sp_time": sp_time, "residual_tol": 1e-14, "max_iters": 200000},
        )
        result = SolverService.advance(case)
        x = 0.5 * (BasisService.gauss_legendre(sp_space).points + 1.0)
        oracle = VerificationService.dg_gauss_step(np.sin(2.0 * np.pi * x), sp_space, sp_time, 1.0, 1.0, dt)
        return float(np.max(np.abs(result.top_trace[0, :, :, 0] - oracle[:, None])))
