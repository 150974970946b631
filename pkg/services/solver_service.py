import logging
import math
import time
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from errors import DivergenceError, InadmissibleStateError, InvalidArgumentError
from models import (
    AdvanceResult,
    CaseConfig,
    ConservationLaw,
    FilterSettings,
    Mesh2D,
    MetricCache,
    NodalField,
    SolveReport,
    SolverConfig,
    SpaceTimeSlab,
)
from services.basis_service import BasisService
from services.geometry_service import SPATIAL_FACES, GeometryService
from services.mesh_service import MeshService
from services.physics_service import ExactSolution, PhysicsService

logger = logging.getLogger(__name__)

ResidualFn = Callable[[np.ndarray], np.ndarray]
SlabObserver = Callable[[int, np.ndarray, "SlabOperator"], None]

RESIDUAL_FORMS = ("hybrid", "conservative")

# field layout: (element, xi, eta, tau, variable)
TRACE_SPECS = {
    "xi-": ("i,eijkv->ejkv", 0),
    "xi+": ("i,eijkv->ejkv", 1),
    "eta-": ("j,eijkv->eikv", 0),
    "eta+": ("j,eijkv->eikv", 1),
}
CORRECTION_SPECS = {
    "xi-": "i,ejkv->eijkv",
    "xi+": "i,ejkv->eijkv",
    "eta-": "j,eikv->eijkv",
    "eta+": "j,eikv->eijkv",
    "tau-": "k,eijv->eijkv",
    "tau+": "k,eijv->eijkv",
}


class SlabOperator:
    """Space-time FR residual of one slab.

    Holds the metric cache, the 1D operators, the face gathers and the trace
    entering through the bottom face. The ``hybrid`` form differentiates Q, F
    and G and applies the metrics afterwards; local face traces use face
    metrics. The ``conservative`` form differentiates the |J|-scaled
    contravariant fluxes, so |J|Q is the working variable; local face traces
    are extrapolations of those fluxes. Both forms coincide when the metric
    products are resolved by the solution points.
    """

    def __init__(
        self,
        mesh: Mesh2D,
        slab: SpaceTimeSlab,
        law: ConservationLaw,
        config: SolverConfig,
        q_below: np.ndarray,
        exact: Optional[ExactSolution] = None,
        metrics: Optional[MetricCache] = None,
    ) -> None:
        ns, nt = config.sp_space, config.sp_time
        self.mesh, self.slab, self.law, self.config = mesh, slab, law, config
        self.ns, self.nt = ns, nt

        self.space = BasisService.gauss_legendre(ns)
        self.time = BasisService.gauss_legendre(nt)
        space_basis = BasisService.lagrange_basis(self.space.points)
        time_basis = BasisService.lagrange_basis(self.time.points)
        self.d_space, self.d_time = space_basis.diff_matrix, time_basis.diff_matrix
        self.rows_space, self.rows_time = space_basis.boundary_rows, time_basis.boundary_rows
        self.corr_space = BasisService.radau_correction(config.correction_space or ns, self.space.points)
        self.corr_time = BasisService.radau_correction(config.correction_time or nt, self.time.points)

        self.metrics = metrics or GeometryService.metric_cache(slab, ns, nt)

        expected = (len(slab), ns, ns, law.n_vars)
        if q_below.shape != expected:
            raise InvalidArgumentError(f"bottom trace shape {q_below.shape} != {expected}")
        self.q_below = q_below

        self.boundary_states: Dict[str, np.ndarray] = {}
        for f, name in enumerate(SPATIAL_FACES):
            if mesh.boundary[:, f].any():
                if exact is None:
                    raise InvalidArgumentError("analytic boundary faces need an exact solution")
                face = self.metrics.faces[name]
                self.boundary_states[name] = exact(face.x, face.y, face.t)

        self._sigma: Optional[np.ndarray] = None

    # ------------------------------------------------------------ pieces

    def local_fluxes(self, Q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Physical fluxes F, G at the solution points"""
        try:
            return PhysicsService.flux(Q, self.law)
        except InadmissibleStateError as exc:
            if exc.index is None:
                raise
            e, i, j, k = exc.index[:4]
            raise InadmissibleStateError(
                f"inadmissible state in element {e} at solution point (xi={i}, eta={j}, tau={k})", exc.index
            ) from exc

    def spatial_traces(self, A: np.ndarray) -> Dict[str, np.ndarray]:
        return {
            name: np.einsum(spec, self.rows_space[side], A) for name, (spec, side) in TRACE_SPECS.items()
        }

    def temporal_trace(self, A: np.ndarray, side: int) -> np.ndarray:
        return np.einsum("k,eijkv->eijv", self.rows_time[side], A)

    def neighbor_traces(self, traces: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Trace seen across each spatial face, in this element's flux point order"""
        stacked = np.stack([traces[name] for name in SPATIAL_FACES], axis=1)
        out = {}
        for f, name in enumerate(SPATIAL_FACES):
            other = stacked[self.mesh.neighbors[:, f], self.mesh.neighbor_faces[:, f]]
            flip = self.mesh.reversed[:, f]
            if flip.any():
                other = np.where(flip[:, None, None, None], other[:, ::-1], other)
            if name in self.boundary_states:
                mask = self.mesh.boundary[:, f][:, None, None, None]
                other = np.where(mask, self.boundary_states[name], other)
            out[name] = other
        return out

    def reference_fluxes(self, Q: np.ndarray, F: np.ndarray, G: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """|J|-scaled contravariant fluxes along tau, xi and eta at the solution points"""
        m = self.metrics.solution
        along_tau = m.tau_t[..., None] * Q
        along_xi = m.xi_t[..., None] * Q + m.xi_x[..., None] * F + m.xi_y[..., None] * G
        along_eta = m.eta_t[..., None] * Q + m.eta_x[..., None] * F + m.eta_y[..., None] * G
        return along_tau, along_xi, along_eta

    def _form(self, form: Optional[str]) -> str:
        form = form or self.config.residual_form
        if form not in RESIDUAL_FORMS:
            raise InvalidArgumentError(f"unknown residual form {form!r}; expected one of {RESIDUAL_FORMS}")
        return form

    def interface_fluxes(
        self, Q: np.ndarray, F: np.ndarray, G: np.ndarray, form: Optional[str] = None
    ) -> Dict[str, np.ndarray]:
        """Jump between the common reference flux and the local reference trace on every face"""
        form = self._form(form)
        q_tr, f_tr, g_tr = self.spatial_traces(Q), self.spatial_traces(F), self.spatial_traces(G)
        q_nb = self.neighbor_traces(q_tr)
        local_traces: Dict[str, np.ndarray] = {}
        if form == "conservative":
            along_tau, along_xi, along_eta = self.reference_fluxes(Q, F, G)
            xi_tr, eta_tr = self.spatial_traces(along_xi), self.spatial_traces(along_eta)
            local_traces = {"xi-": xi_tr["xi-"], "xi+": xi_tr["xi+"], "eta-": eta_tr["eta-"], "eta+": eta_tr["eta+"]}
            local_traces["tau-"] = self.temporal_trace(along_tau, 0)
            local_traces["tau+"] = self.temporal_trace(along_tau, 1)

        jumps: Dict[str, np.ndarray] = {}
        for name in SPATIAL_FACES:
            fm = self.metrics.faces[name]
            common = PhysicsService.rusanov_flux(
                q_tr[name], q_nb[name], (fm.normal_x, fm.normal_y), self.law, fm.normal_speed
            )
            numerical = (fm.scaling * fm.spatial_fraction)[..., None] * common
            if form == "conservative":
                local = local_traces[name]
            else:
                local = (
                    fm.row_t[..., None] * q_tr[name] + fm.row_x[..., None] * f_tr[name] + fm.row_y[..., None] * g_tr[name]
                )
            jumps[name] = numerical - local

        for name, side, outer in (("tau-", 0, self.q_below), ("tau+", 1, None)):
            fm = self.metrics.faces[name]
            own = self.temporal_trace(Q, side)
            common = PhysicsService.temporal_common_flux(outer, own) if side == 0 else own
            local = local_traces[name] if form == "conservative" else fm.row_t[..., None] * own
            jumps[name] = (fm.scaling * fm.sign)[..., None] * common - local
        return jumps

    def residual(self, Q: np.ndarray, form: Optional[str] = None) -> np.ndarray:
        """R(Q) with dQ/d(pseudo time) = R at every solution point"""
        form = self._form(form)
        F, G = self.local_fluxes(Q)
        m = self.metrics.solution
        ds, dt = self.d_space, self.d_time

        if form == "conservative":
            along_tau, along_xi, along_eta = self.reference_fluxes(Q, F, G)
            div = (
                np.einsum("ck,eijkv->eijcv", dt, along_tau)
                + np.einsum("ai,eijkv->eajkv", ds, along_xi)
                + np.einsum("bj,eijkv->eibkv", ds, along_eta)
            )
        else:
            div = self._hybrid_divergence(Q, F, G)

        jumps = self.interface_fluxes(Q, F, G, form)
        derivs = {
            "xi-": self.corr_space.left_deriv,
            "xi+": self.corr_space.right_deriv,
            "eta-": self.corr_space.left_deriv,
            "eta+": self.corr_space.right_deriv,
            "tau-": self.corr_time.left_deriv,
            "tau+": self.corr_time.right_deriv,
        }
        for name, spec in CORRECTION_SPECS.items():
            div = div + np.einsum(spec, derivs[name], jumps[name])
        return -div / m.det[..., None]

    def _hybrid_divergence(self, Q: np.ndarray, F: np.ndarray, G: np.ndarray) -> np.ndarray:
        m = self.metrics.solution
        ds, dt = self.d_space, self.d_time
        return (
            m.tau_t[..., None] * np.einsum("ck,eijkv->eijcv", dt, Q)
            + m.xi_t[..., None] * np.einsum("ai,eijkv->eajkv", ds, Q)
            + m.eta_t[..., None] * np.einsum("bj,eijkv->eibkv", ds, Q)
            + m.xi_x[..., None] * np.einsum("ai,eijkv->eajkv", ds, F)
            + m.eta_x[..., None] * np.einsum("bj,eijkv->eibkv", ds, F)
            + m.xi_y[..., None] * np.einsum("ai,eijkv->eajkv", ds, G)
            + m.eta_y[..., None] * np.einsum("bj,eijkv->eibkv", ds, G)
        )

    # ------------------------------------------------------------ pseudo time

    def spectral_bound(self, Q: np.ndarray) -> np.ndarray:
        """Upper bound of the residual operator's rate at every solution point"""
        m = self.metrics.solution
        c_space, c_time = 0.5 * self.ns**2, 0.5 * self.nt**2
        total = np.abs(m.tau_t) * c_time
        for row_t, row_x, row_y in ((m.xi_t, m.xi_x, m.xi_y), (m.eta_t, m.eta_x, m.eta_y)):
            grad = np.sqrt(row_x**2 + row_y**2)
            speed = PhysicsService.max_wavespeed(Q, self.law, (row_x / grad, row_y / grad))
            total = total + (np.abs(row_t) + grad * speed) * c_space
        return total / m.det

    def local_step(self, Q: np.ndarray) -> np.ndarray:
        """Element-local pseudo-time step, shape (E, 1, 1, 1, 1)"""
        sigma = self.spectral_bound(Q)
        self._sigma = sigma
        per_element = sigma.reshape(sigma.shape[0], -1).max(axis=1)
        return (self.config.cfl / per_element)[:, None, None, None, None]

    def top_trace(self, Q: np.ndarray) -> np.ndarray:
        return self.temporal_trace(Q, 1)

    def top_integral(self, top: np.ndarray) -> np.ndarray:
        """Quadrature of each variable over the slab top"""
        w = self.space.weights
        return np.einsum("i,j,eij,eijv->v", w, w, self.metrics.faces["tau+"].row_t, top)

    def residual_floor(self, Q: np.ndarray) -> float:
        scale = float(np.max(np.abs(Q))) if Q.size else 0.0
        sigma = self._sigma if self._sigma is not None else self.spectral_bound(Q)
        return self.config.residual_floor * max(scale, 1e-300) * float(np.max(sigma))


class SolverService:
    """Service for the space-time FR slab solver"""

    @classmethod
    def build_operator(
        cls,
        mesh: Mesh2D,
        slab: SpaceTimeSlab,
        law: ConservationLaw,
        config: SolverConfig,
        q_below: np.ndarray,
        exact: Optional[ExactSolution] = None,
    ) -> SlabOperator:
        return SlabOperator(mesh, slab, law, config, q_below, exact)

    @classmethod
    def local_fluxes(cls, field: np.ndarray, op: SlabOperator) -> Tuple[np.ndarray, np.ndarray]:
        return op.local_fluxes(field)

    @classmethod
    def interface_fluxes(cls, field: np.ndarray, op: SlabOperator, form: Optional[str] = None) -> Dict[str, np.ndarray]:
        F, G = op.local_fluxes(field)
        return op.interface_fluxes(field, F, G, form)

    @classmethod
    def stfr_residual(cls, field: np.ndarray, op: SlabOperator, form: Optional[str] = None) -> np.ndarray:
        return op.residual(field, form)

    @staticmethod
    def pseudo_time_step(
        field: np.ndarray,
        residual_fn: ResidualFn,
        dtau: np.ndarray | float,
        residual: Optional[np.ndarray] = None,
        iteration: int = 0,
    ) -> np.ndarray:
        """One SSPRK2 step of dQ/d(pseudo time) = R(Q)"""
        r0 = residual_fn(field) if residual is None else residual
        stage = field + dtau * r0
        updated = 0.5 * field + 0.5 * (stage + dtau * residual_fn(stage))
        if not np.all(np.isfinite(updated)):
            raise DivergenceError(iteration)
        return updated

    @classmethod
    def solve_slab(
        cls, field: np.ndarray, op: SlabOperator, config: Optional[SolverConfig] = None
    ) -> Tuple[np.ndarray, SolveReport]:
        """Iterate pseudo time until the max-norm residual drops by ``residual_tol``"""
        config = config or op.config
        start = time.perf_counter()
        Q = np.array(field, dtype=float, copy=True)
        dtau = op.local_step(Q)
        floor = op.residual_floor(Q)

        r_initial = 0.0
        r_abs = 0.0
        iterations = 0
        converged = diverged = False
        try:
            for iterations in range(config.max_iters + 1):
                R = op.residual(Q)
                r_abs = float(np.max(np.abs(R)))
                if iterations == 0:
                    r_initial = r_abs
                if not math.isfinite(r_abs):
                    raise DivergenceError(iterations, op.slab.index)
                if r_abs <= floor or r_abs <= config.residual_tol * r_initial:
                    converged = True
                    break
                if iterations == config.max_iters:
                    break
                Q = cls.pseudo_time_step(Q, op.residual, dtau, residual=R, iteration=iterations + 1)
        except DivergenceError as exc:
            logger.warning("slab %d diverged at pseudo-time iteration %d", op.slab.index, exc.iteration)
            diverged = True
            iterations = exc.iteration

        report = SolveReport(
            slab=op.slab.index,
            iterations=iterations,
            initial_residual=r_initial,
            residual_abs=r_abs,
            final_residual=r_abs / r_initial if r_initial > 0.0 else 0.0,
            converged=converged,
            diverged=diverged,
            wall_ms=1e3 * (time.perf_counter() - start),
        )
        logger.debug(
            "slab %d: %d iterations, residual %.3e -> %.3e", report.slab, iterations, r_initial, r_abs
        )
        return Q, report

    @classmethod
    def filter_hook(cls, field: np.ndarray, settings: FilterSettings, sp_space: int, sp_time: int) -> np.ndarray:
        """Blend every element's space-time solution with its projection onto fewer points"""
        if not settings.active:
            return field
        pair = BasisService.projection_pair(
            sp_space,
            sp_time,
            settings.space_points or sp_space,
            settings.time_points or sp_time,
            settings.theta,
            filter_space=settings.space_points is not None,
            filter_time=settings.time_points is not None,
        )
        filtered = BasisService.filter_field(np.moveaxis(field, 0, 3), pair)
        return np.moveaxis(filtered, 3, 0)

    @classmethod
    def advance(cls, case: CaseConfig, observer: Optional[SlabObserver] = None) -> AdvanceResult:
        """March slab by slab from t = 0 to case.time.t_end"""
        config = case.solver
        law = case.law
        exact = PhysicsService.exact_solution(case)
        mesh = MeshService.build_mesh(case.mesh, case.degrees.l, case.motion)
        n = case.degrees.n
        t_end, dt = case.time.t_end, case.time.dt
        label = GeometryService.classify_scheme(
            case.k, case.m, case.degrees.l, n, config.sp_space, config.sp_time
        )
        logger.info(
            "%s: %d elements, sp_space=%d sp_time=%d, scheme %s (space %s, time %s), dt=%g, T=%g",
            case.case.name,
            mesh.n_elements,
            config.sp_space,
            config.sp_time,
            label.label.value,
            label.space.value,
            label.time.value,
            dt,
            t_end,
        )

        first = MeshService.build_slab(mesh, case.motion, 0.0, min(dt, t_end) if t_end > 0 else dt, n, index=0)
        metrics = GeometryService.metric_cache(first, config.sp_space, config.sp_time)
        bottom = metrics.faces["tau-"]
        q_below = exact(bottom.x, bottom.y, bottom.t)

        reports: List[SolveReport] = []
        times: List[float] = [0.0]
        integrals: List[np.ndarray] = []
        field = np.repeat(q_below[:, :, :, None, :], config.sp_time, axis=3)
        slab = first
        w = BasisService.gauss_legendre(config.sp_space).weights
        integrals.append(np.einsum("i,j,eij,eijv->v", w, w, bottom.row_t, q_below))

        if t_end <= 0.0:
            return AdvanceResult(
                field=NodalField(values=field, t_start=0.0, dt=first.dt),
                top_trace=q_below,
                trace_times=times,
                integrals=integrals,
                reports=reports,
                slab=first,
                mesh=mesh,
                trace_tau=-1.0,
            )

        t = 0.0
        index = 0
        while t < t_end - 1e-12 * max(1.0, t_end):
            h = min(dt, t_end - t)
            if index > 0:
                slab = MeshService.build_slab(mesh, case.motion, t, h, n, index=index)
                metrics = None
            op = SlabOperator(mesh, slab, law, config, q_below, exact, metrics=metrics)
            guess = np.repeat(q_below[:, :, :, None, :], config.sp_time, axis=3)
            field, report = cls.solve_slab(guess, op, config)
            reports.append(report)
            if report.diverged:
                raise DivergenceError(report.iterations, index)
            if not report.converged:
                logger.warning(
                    "slab %d stopped after %d iterations at relative residual %.3e",
                    index,
                    report.iterations,
                    report.final_residual,
                )
            if config.filter.active:
                field = cls.filter_hook(field, config.filter, config.sp_space, config.sp_time)
            if observer is not None:
                observer(index, field, op)

            q_below = op.top_trace(field)
            integrals.append(op.top_integral(q_below))
            t += h
            times.append(t)
            index += 1

        logger.info(
            "%s: %d slabs, %d pseudo-time iterations", case.case.name, len(reports), sum(r.iterations for r in reports)
        )
        return AdvanceResult(
            field=NodalField(values=field, t_start=slab.t_start, dt=slab.dt),
            top_trace=q_below,
            trace_times=times,
            integrals=integrals,
            reports=reports,
            slab=slab,
            mesh=mesh,
        )
