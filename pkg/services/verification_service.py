import asyncio
import logging
import math
import time
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from errors import InvalidArgumentError, UnsupportedCaseError
from models import (
    AdvanceResult,
    CaseConfig,
    ConvergenceRow,
    GCLRow,
    MeshSettings,
    MotionLaw,
    SpaceTimeSlab,
)
from services.basis_service import BasisService
from services.geometry_service import GeometryService
from services.mesh_service import MeshService
from services.physics_service import ExactSolution, PhysicsService
from services.solver_service import SlabOperator, SolverService

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["case", "refine", "param", "error_l2", "rate", "label", "iters", "residual", "wall_ms"]
GCL_COLUMNS = ["l", "n", "alpha", "beta", "res_time", "res_x", "res_y", "resolved", "within_tol", "flagged"]
GCL_TOL = 1e-11
# errors at roundoff level carry no rate information
RATE_ERROR_FLOOR = 1e-14
SPATIAL_SHARE_MAX = 0.01


class VerificationService:
    """Service for error norms, convergence ladders, freestream and GCL checks"""

    # ------------------------------------------------------------ error norms

    @classmethod
    def l2_error(
        cls,
        trace: np.ndarray,
        slab: SpaceTimeSlab,
        exact: ExactSolution,
        tau: float = 1.0,
        n_quad: Optional[int] = None,
        variable: int = 0,
    ) -> float:
        """Volume-normalized L2 error of a spatial trace (E, ns, ns, Nv) at the slab time level ``tau``"""
        ns = trace.shape[1]
        quad = BasisService.gauss_legendre(n_quad or ns + 3)
        p = GeometryService.partials(slab.xy_nodes, slab.t_nodes, quad.points, quad.points, [tau])
        x, y, t = (p[key][..., 0] for key in ("x", "y", "t"))
        jac = (p["x_xi"] * p["y_eta"] - p["x_eta"] * p["y_xi"])[..., 0]

        interp = BasisService.lagrange_basis(BasisService.gauss_legendre(ns).points).evaluate(quad.points)
        approx = np.einsum("pi,qj,eijv->epqv", interp, interp, trace)[..., variable]
        diff = approx - exact(x, y, t)[..., variable]

        w = quad.weights
        volume = np.einsum("p,q,epq->", w, w, jac)
        return math.sqrt(float(np.einsum("p,q,epq->", w, w, jac * diff * diff)) / volume)

    @classmethod
    def result_error(cls, result: AdvanceResult, exact: ExactSolution, variable: int = 0) -> float:
        if result.slab is None:
            raise InvalidArgumentError("advance result carries no slab geometry")
        return cls.l2_error(result.top_trace, result.slab, exact, result.trace_tau, variable=variable)

    @staticmethod
    def compute_rates(params: Sequence[float], errors: Sequence[float]) -> List[Optional[float]]:
        """log(e_{i-1}/e_i) / log(p_{i-1}/p_i); None on the first rung and for roundoff-level errors"""
        rates: List[Optional[float]] = [None]
        for i in range(1, len(errors)):
            if min(errors[i], errors[i - 1]) <= RATE_ERROR_FLOOR or params[i] == params[i - 1]:
                rates.append(None)
                continue
            rates.append(math.log(errors[i - 1] / errors[i]) / math.log(params[i - 1] / params[i]))
        return rates

    # ------------------------------------------------------------ ladders

    @classmethod
    def refine_space(cls, case: CaseConfig, value: float) -> CaseConfig:
        mesh = case.mesh
        if mesh.kind == "disk":
            update = {"levels": int(value)}
        else:
            nx = int(value)
            ny = 1 if mesh.ny == 1 else max(1, round(nx * mesh.ny / mesh.nx))
            update = {"nx": nx, "ny": ny}
        return case.model_copy(update={"mesh": mesh.model_copy(update=update)})

    @classmethod
    def refine_time(cls, case: CaseConfig, value: float) -> CaseConfig:
        return case.model_copy(update={"time": case.time.model_copy(update={"dt": float(value)})})

    @classmethod
    def run_case(cls, case: CaseConfig) -> Tuple[float, AdvanceResult, float]:
        """Advance one case and measure its error; returns (error, result, wall ms)"""
        start = time.perf_counter()
        result = SolverService.advance(case)
        error = cls.result_error(result, PhysicsService.exact_solution(case))
        return error, result, 1e3 * (time.perf_counter() - start)

    @classmethod
    async def _run_ladder(
        cls, cases: Sequence[CaseConfig], params: Sequence[float], label: str, threads: int, timings: bool
    ) -> List[ConvergenceRow]:
        semaphore = asyncio.Semaphore(max(1, threads))

        async def run(case: CaseConfig) -> Tuple[float, AdvanceResult, float]:
            async with semaphore:
                return await asyncio.to_thread(cls.run_case, case)

        outcomes = await asyncio.gather(*(run(case) for case in cases))
        errors = [err for err, _, _ in outcomes]
        rates = cls.compute_rates(params, errors)
        rows = []
        for i, ((err, result, wall), case, param) in enumerate(zip(outcomes, cases, params)):
            rows.append(
                ConvergenceRow(
                    case=case.case.name,
                    refine=i,
                    param=float(param),
                    error_l2=err,
                    rate=rates[i],
                    label=label,
                    iters=result.iterations,
                    residual=result.final_residual,
                    wall_ms=wall if timings else None,
                )
            )
            logger.info("%s rung %d: param=%.4g error=%.4e rate=%s", case.case.name, i, param, err, rates[i])
        return rows

    @classmethod
    async def spatial_convergence(
        cls, case: CaseConfig, ladder: Optional[Sequence[float]] = None, threads: int = 1, timings: bool = True
    ) -> List[ConvergenceRow]:
        """Error and observed rate for each mesh on the ladder at fixed dt"""
        values = list(ladder or case.ladder.values)
        if len(values) < 2:
            raise InvalidArgumentError("a convergence ladder needs at least two rungs")
        if case.solver.sp_time < 7:
            logger.warning("%s: spatial study with sp_time=%d; temporal error may pollute rates", case.case.name, case.solver.sp_time)
        cases = [cls.refine_space(case, v) for v in values]
        params = [MeshService.build_mesh(c.mesh, c.degrees.l).size for c in cases]
        label = GeometryService.classify_space(case.k, case.degrees.l, case.solver.sp_space).value
        return await cls._run_ladder(cases, params, label, threads, timings)

    @classmethod
    async def temporal_convergence(
        cls,
        case: CaseConfig,
        dt_ladder: Optional[Sequence[float]] = None,
        threads: int = 1,
        timings: bool = True,
        precheck: bool = False,
    ) -> List[ConvergenceRow]:
        """Error and observed rate for each time step on the ladder at a fixed mesh"""
        values = list(dt_ladder or case.ladder.values)
        if len(values) < 2:
            raise InvalidArgumentError("a convergence ladder needs at least two rungs")
        cases = [cls.refine_time(case, v) for v in values]
        label = GeometryService.classify_time(case.m, case.degrees.n, case.solver.sp_time).value
        rows = await cls._run_ladder(cases, values, label, threads, timings)
        if precheck:
            share = await cls.spatial_sufficiency(cases[0], rows[0].error_l2)
            rows[0] = rows[0].model_copy(update={"spatial_share": share})
        return rows

    @classmethod
    async def spatial_sufficiency(cls, case: CaseConfig, temporal_error: float) -> float:
        """Estimate the spatial share of an error by rerunning with two more solution points"""
        richer = case.model_copy(
            update={"solver": case.solver.model_copy(update={"sp_space": case.solver.sp_space + 2})}
        )
        error, _, _ = await asyncio.to_thread(cls.run_case, richer)
        share = abs(temporal_error - error) / max(temporal_error, 1e-300)
        if share > SPATIAL_SHARE_MAX:
            logger.warning(
                "%s: spatial error is %.1f%% of the coarsest temporal error; raise sp_space",
                case.case.name,
                100.0 * share,
            )
        return share

    # ------------------------------------------------------------ freestream and GCL

    @classmethod
    def freestream_test(cls, case: CaseConfig) -> float:
        """Largest deviation from a constant state over every solution point of every slab"""
        if case.initial.kind != "constant":
            case = case.model_copy(update={"initial": case.initial.model_copy(update={"kind": "constant"})})
        state = PhysicsService.exact_solution(case)(np.zeros(1), np.zeros(1), 0.0)[0]
        deviation = 0.0

        def observe(index: int, field: np.ndarray, op: SlabOperator) -> None:
            nonlocal deviation
            deviation = max(deviation, float(np.max(np.abs(field - state))))

        result = SolverService.advance(case, observer=observe)
        deviation = max(deviation, float(np.max(np.abs(result.top_trace - state))))
        logger.info("%s: freestream deviation %.3e", case.case.name, deviation)
        return deviation

    @classmethod
    def gcl_campaign(
        cls,
        motion: MotionLaw,
        ln_grid: Iterable[Tuple[int, int]],
        basis_grid: Iterable[Tuple[int, int]],
        mesh: Optional[MeshSettings] = None,
        t_start: float = 0.5,
        dt: float = 0.1,
        tol: float = GCL_TOL,
    ) -> List[GCLRow]:
        """Discrete GCL residuals on one slab of a moving mesh for every (l, n) and sampling degree.

        ``basis_grid`` holds (alpha, beta) offsets added to (2l, 2n); negative
        offsets give deliberately under-resolved samples.
        """
        settings = mesh or MeshSettings(kind="disk" if motion.kind == "circular" else "square", nx=4, ny=4)
        offsets = list(basis_grid)
        rows: List[GCLRow] = []
        for l, n in ln_grid:
            grid = MeshService.build_mesh(settings, l, motion)
            slab = MeshService.build_slab(grid, motion, t_start, dt, n)
            for da, db in offsets:
                alpha, beta = 2 * l + da, 2 * n + db
                if alpha < 0 or beta < 0:
                    continue
                res = GeometryService.gcl_residual_nodes(slab.xy_nodes, slab.t_nodes, alpha, beta)
                rows.append(
                    GCLRow(
                        l=l,
                        n=n,
                        alpha=alpha,
                        beta=beta,
                        res_time=res[0],
                        res_x=res[1],
                        res_y=res[2],
                        resolved=alpha >= 2 * l and beta >= 2 * n,
                        within_tol=max(res) <= tol,
                    )
                )
        return rows

    # ------------------------------------------------------------ oracles

    @classmethod
    def dg_gauss_step(
        cls,
        u0: np.ndarray,
        sp_space: int,
        sp_time: int,
        velocity: float,
        width: float,
        dt: float,
        correction_space: Optional[int] = None,
    ) -> np.ndarray:
        """One DG-in-time step with Gauss quadrature for upwind FR advection on a single periodic element.

        The temporal discretization is assembled as a dense implicit Runge-Kutta
        system from the weak form, independently of the correction-function path.
        """
        if velocity <= 0.0:
            raise InvalidArgumentError("the oracle assumes a positive advection velocity")
        space = BasisService.gauss_legendre(sp_space)
        time_q = BasisService.gauss_legendre(sp_time)
        sb = BasisService.lagrange_basis(space.points)
        tb = BasisService.lagrange_basis(time_q.points)
        g = BasisService.radau_correction(correction_space or sp_space, space.points)

        jump = sb.boundary_rows[1] - sb.boundary_rows[0]
        A = -(2.0 * velocity / width) * (sb.diff_matrix + np.outer(g.left_deriv, jump))

        start, end = tb.boundary_rows
        w = time_q.weights
        eye = np.eye(sp_space)
        system = (
            np.kron(np.diag(w) @ tb.diff_matrix, eye)
            - 0.5 * dt * np.kron(np.diag(w), A)
            + np.kron(np.outer(start, start), eye)
        )
        rhs = np.kron(start, np.asarray(u0, dtype=float))
        stages = np.linalg.solve(system, rhs).reshape(sp_time, sp_space)
        return end @ stages

    @staticmethod
    def dense_projection(values_high: np.ndarray, high_space: int, high_time: int, low_space: int, low_time: int) -> np.ndarray:
        """L2 projection by solving the low-space mass-matrix system on the high quadrature"""
        hs, ht = BasisService.gauss_legendre(high_space), BasisService.gauss_legendre(high_time)
        ls, lt = BasisService.gauss_legendre(low_space), BasisService.gauss_legendre(low_time)
        phi_s = BasisService.lagrange_basis(ls.points).evaluate(hs.points)
        phi_t = BasisService.lagrange_basis(lt.points).evaluate(ht.points)
        phi = np.einsum("ia,jb,kc->ijkabc", phi_s, phi_s, phi_t).reshape(hs.npts**2 * ht.npts, -1)
        w = np.einsum("i,j,k->ijk", hs.weights, hs.weights, ht.weights).ravel()
        mass = phi.T @ (w[:, None] * phi)
        load = phi.T @ (w * np.asarray(values_high, dtype=float).ravel())
        return np.linalg.solve(mass, load).reshape(low_space, low_space, low_time)

    # ------------------------------------------------------------ tables

    @staticmethod
    def rows_to_frame(rows: Sequence[ConvergenceRow]) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in rows], columns=TABLE_COLUMNS)

    @staticmethod
    def gcl_to_frame(rows: Sequence[GCLRow]) -> pd.DataFrame:
        return pd.DataFrame(
            [{**row.model_dump(), "flagged": row.flagged} for row in rows],
            columns=GCL_COLUMNS,
        )

    @classmethod
    def write_table(cls, frame: pd.DataFrame, path: str | Path, fmt: str = "csv") -> Path:
        if fmt not in ("csv", "tsv"):
            raise UnsupportedCaseError(f"unknown table format {fmt!r}")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, sep="," if fmt == "csv" else "\t", index=False, float_format="%.6e")
        return path
