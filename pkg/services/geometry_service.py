import logging
from typing import Dict, Sequence, Tuple

import numpy as np

from errors import DegenerateElementError, InvalidArgumentError
from models import (
    FaceMetrics,
    FluxDegrees,
    MetricCache,
    MetricDegrees,
    MetricEntries,
    SchemeClassification,
    SchemeLabel,
    SpaceTimeElement,
    SpaceTimeSlab,
)
from services.basis_service import BasisService

logger = logging.getLogger(__name__)

# (name, axis along which the face is fixed, value of that coordinate)
FACES: Tuple[Tuple[str, str, float], ...] = (
    ("xi-", "xi", -1.0),
    ("xi+", "xi", 1.0),
    ("eta-", "eta", -1.0),
    ("eta+", "eta", 1.0),
    ("tau-", "tau", -1.0),
    ("tau+", "tau", 1.0),
)
SPATIAL_FACES = ("xi-", "xi+", "eta-", "eta+")
FACE_LOOKUP = {name: (axis, value) for name, axis, value in FACES}

Partials = Dict[str, np.ndarray]


class GeometryService:
    """Service for space-time element mappings, metrics and scheme classification"""

    @classmethod
    def partials(
        cls,
        xy_nodes: np.ndarray,
        t_nodes: np.ndarray,
        xi: Sequence[float],
        eta: Sequence[float],
        tau: Sequence[float],
    ) -> Partials:
        """Mapping values and first derivatives on the tensor grid xi x eta x tau.

        ``xy_nodes`` is (E, l+1, l+1, n+1, 2) or a single element without the
        leading axis. Every returned array has shape (E, len(xi), len(eta), len(tau)).
        """
        nodes = np.asarray(xy_nodes, dtype=float)
        if nodes.ndim == 4:
            nodes = nodes[None]
        l, n = nodes.shape[1] - 1, nodes.shape[3] - 1
        space = BasisService.lagrange_basis(BasisService.gauss_lobatto(l + 1).points)
        time = BasisService.lagrange_basis(BasisService.gauss_lobatto(n + 1).points)

        xi, eta, tau = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (xi, eta, tau))
        b_xi, d_xi = space.evaluate(xi), space.derivative(xi)
        b_eta, d_eta = space.evaluate(eta), space.derivative(eta)
        b_tau, d_tau = time.evaluate(tau), time.derivative(tau)

        def contract(a: np.ndarray, b: np.ndarray, c: np.ndarray, comp: int) -> np.ndarray:
            return np.einsum("pa,qb,rc,eabc->epqr", a, b, c, nodes[..., comp], optimize=True)

        out: Partials = {}
        for comp, name in ((0, "x"), (1, "y")):
            out[name] = contract(b_xi, b_eta, b_tau, comp)
            out[f"{name}_xi"] = contract(d_xi, b_eta, b_tau, comp)
            out[f"{name}_eta"] = contract(b_xi, d_eta, b_tau, comp)
            out[f"{name}_tau"] = contract(b_xi, b_eta, d_tau, comp)

        shape = out["x"].shape
        t_vals = b_tau @ np.asarray(t_nodes, dtype=float)
        t_tau = d_tau @ np.asarray(t_nodes, dtype=float)
        out["t"] = np.broadcast_to(t_vals[None, None, None, :], shape).copy()
        out["t_tau"] = np.broadcast_to(t_tau[None, None, None, :], shape).copy()
        return out

    @classmethod
    def metrics_from_partials(cls, p: Partials) -> MetricEntries:
        """|J| and |J|-scaled inverse-Jacobian entries, non-conservative form"""
        spatial = p["x_xi"] * p["y_eta"] - p["x_eta"] * p["y_xi"]
        return MetricEntries(
            det=p["t_tau"] * spatial,
            tau_t=spatial,
            xi_t=-p["x_tau"] * p["y_eta"] + p["y_tau"] * p["x_eta"],
            eta_t=p["x_tau"] * p["y_xi"] - p["y_tau"] * p["x_xi"],
            xi_x=p["t_tau"] * p["y_eta"],
            xi_y=-p["t_tau"] * p["x_eta"],
            eta_x=-p["t_tau"] * p["y_xi"],
            eta_y=p["t_tau"] * p["x_xi"],
        )

    @staticmethod
    def _ref_point(ref_pt: Sequence[float]) -> Tuple[float, float, float]:
        if len(ref_pt) != 3:
            raise InvalidArgumentError(f"reference point must be (tau, xi, eta), got {ref_pt}")
        tau, xi, eta = (float(v) for v in ref_pt)
        if max(abs(tau), abs(xi), abs(eta)) > 1.0 + 1e-14:
            raise InvalidArgumentError(f"reference point {ref_pt} lies outside [-1, 1]^3")
        return tau, xi, eta

    @classmethod
    def geometry_maps(cls, elem: SpaceTimeElement, ref_pt: Sequence[float]) -> Dict[str, float]:
        """(t, x, y) and the 3x3 Jacobian d(t, x, y)/d(tau, xi, eta) at one reference point"""
        tau, xi, eta = cls._ref_point(ref_pt)
        p = cls.partials(elem.xy_nodes, elem.t_nodes, [xi], [eta], [tau])
        return {key: float(value.ravel()[0]) for key, value in p.items()}

    @staticmethod
    def jacobian_matrix(maps: Dict[str, float]) -> np.ndarray:
        """Rows (t, x, y), columns (tau, xi, eta)"""
        return np.array(
            [
                [maps["t_tau"], 0.0, 0.0],
                [maps["x_tau"], maps["x_xi"], maps["x_eta"]],
                [maps["y_tau"], maps["y_xi"], maps["y_eta"]],
            ]
        )

    @classmethod
    def metrics_nonconservative(cls, elem: SpaceTimeElement, ref_pt: Sequence[float]) -> MetricEntries:
        tau, xi, eta = cls._ref_point(ref_pt)
        p = cls.partials(elem.xy_nodes, elem.t_nodes, [xi], [eta], [tau])
        entries = cls.metrics_from_partials(p)
        det = float(entries.det.ravel()[0])
        if det <= 0.0:
            raise DegenerateElementError(elem.index, (tau, xi, eta), det)
        return MetricEntries(**{k: np.asarray(getattr(entries, k)).reshape(()) for k in MetricEntries.model_fields})

    @staticmethod
    def metric_matrix(entries: MetricEntries) -> np.ndarray:
        """|J| J^{-1}: rows (tau, xi, eta), columns (t, x, y)"""
        return np.array(
            [
                [entries.tau_t, 0.0, 0.0],
                [entries.xi_t, entries.xi_x, entries.xi_y],
                [entries.eta_t, entries.eta_x, entries.eta_y],
            ],
            dtype=float,
        )

    @classmethod
    def face_flux_scaling(cls, elem: SpaceTimeElement, face: str, flux_pt: Sequence[float]) -> float:
        """|J| |grad^st(face coordinate)| times the sign of the outward normal"""
        if face not in FACE_LOOKUP:
            raise InvalidArgumentError(f"unknown face {face!r}")
        tau, xi, eta = cls._ref_point(flux_pt)
        axis, value = FACE_LOOKUP[face]
        on_face = {"tau": tau, "xi": xi, "eta": eta}[axis]
        if abs(on_face - value) > 1e-12:
            raise InvalidArgumentError(f"flux point {tuple(flux_pt)} is not on face {face}")
        entries = cls.metrics_nonconservative(elem, (tau, xi, eta))
        row = cls._face_row(entries, axis)
        return float(np.sign(value) * np.sqrt(sum(float(r) ** 2 for r in row)))

    @staticmethod
    def _face_row(entries: MetricEntries, axis: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if axis == "tau":
            zero = np.zeros_like(entries.tau_t)
            return entries.tau_t, zero, zero
        if axis == "xi":
            return entries.xi_t, entries.xi_x, entries.xi_y
        return entries.eta_t, entries.eta_x, entries.eta_y

    @classmethod
    def metric_cache(cls, slab: SpaceTimeSlab, sp_space: int, sp_time: int) -> MetricCache:
        """Metrics at solution points and at the flux points of all six faces of every element"""
        gs = BasisService.gauss_legendre(sp_space).points
        gt = BasisService.gauss_legendre(sp_time).points

        p = cls.partials(slab.xy_nodes, slab.t_nodes, gs, gs, gt)
        solution = cls.metrics_from_partials(p)
        cls._check_positive(solution.det, (gs, gs, gt), "solution")

        faces: Dict[str, FaceMetrics] = {}
        for name, axis, value in FACES:
            grids = {"xi": gs, "eta": gs, "tau": gt}
            grids[axis] = np.array([value])
            fp = cls.partials(slab.xy_nodes, slab.t_nodes, grids["xi"], grids["eta"], grids["tau"])
            entries = cls.metrics_from_partials(fp)
            cls._check_positive(entries.det, (grids["xi"], grids["eta"], grids["tau"]), name)
            squeeze_axis = {"xi": 1, "eta": 2, "tau": 3}[axis]
            faces[name] = cls._face_metrics(name, axis, value, entries, fp, squeeze_axis)

        return MetricCache(solution=solution, x=p["x"], y=p["y"], t=p["t"], faces=faces)

    @classmethod
    def _face_metrics(
        cls, name: str, axis: str, sign: float, entries: MetricEntries, fp: Partials, squeeze_axis: int
    ) -> FaceMetrics:
        def sq(a: np.ndarray) -> np.ndarray:
            return np.squeeze(a, axis=squeeze_axis)

        row_t, row_x, row_y = (sq(r) for r in cls._face_row(entries, axis))
        norm = np.sqrt(row_t**2 + row_x**2 + row_y**2)
        data = dict(
            name=name,
            sign=sign,
            x=sq(fp["x"]),
            y=sq(fp["y"]),
            t=sq(fp["t"]),
            det=sq(entries.det),
            row_t=row_t,
            row_x=row_x,
            row_y=row_y,
            scaling=sign * norm,
        )
        if axis != "tau":
            spatial = np.sqrt(row_x**2 + row_y**2)
            data.update(
                normal_x=sign * row_x / spatial,
                normal_y=sign * row_y / spatial,
                normal_speed=-sign * row_t / spatial,
                spatial_fraction=spatial / norm,
            )
        return FaceMetrics(**data)

    @staticmethod
    def _check_positive(det: np.ndarray, grids: Tuple[np.ndarray, np.ndarray, np.ndarray], where: str) -> None:
        bad = np.argwhere(det <= 0.0)
        if bad.size:
            e, i, j, k = (int(v) for v in bad[0])
            xi, eta, tau = grids[0][i], grids[1][j], grids[2][k]
            logger.debug("non-positive |J| at %s points of element %d", where, e)
            raise DegenerateElementError(e, (tau, xi, eta), float(det[e, i, j, k]))

    @classmethod
    def check_slab(cls, slab: SpaceTimeSlab, samples: int = 0) -> None:
        """Raise when |J| <= 0 at any Gauss point of a (l+2)^2 x (n+2) check grid"""
        gs = BasisService.gauss_legendre(samples or slab.l + 2).points
        gt = BasisService.gauss_legendre(samples or slab.n + 2).points
        det = cls.metrics_from_partials(cls.partials(slab.xy_nodes, slab.t_nodes, gs, gs, gt)).det
        cls._check_positive(det, (gs, gs, gt), "check")

    @classmethod
    def gcl_residual(cls, elem: SpaceTimeElement, alpha: int, beta: int) -> Tuple[float, float, float]:
        """Max-norm of the three discrete GCL sums after sampling the metrics on a
        Gauss-Legendre grid of degree alpha in space and beta in time"""
        return cls.gcl_residual_nodes(elem.xy_nodes, elem.t_nodes, alpha, beta)

    @classmethod
    def gcl_residual_nodes(
        cls, xy_nodes: np.ndarray, t_nodes: np.ndarray, alpha: int, beta: int
    ) -> Tuple[float, float, float]:
        """GCL residuals over one element or a whole slab of geometry nodes"""
        if alpha < 0 or beta < 0:
            raise InvalidArgumentError(f"sampling degrees must be non-negative, got alpha={alpha} beta={beta}")
        gs = BasisService.gauss_legendre(alpha + 1).points
        gt = BasisService.gauss_legendre(beta + 1).points
        m = cls.metrics_from_partials(cls.partials(xy_nodes, t_nodes, gs, gs, gt))
        ds = BasisService.lagrange_basis(gs).diff_matrix
        dt = BasisService.lagrange_basis(gt).diff_matrix

        def d_xi(a: np.ndarray) -> np.ndarray:
            return np.einsum("pi,eijk->epjk", ds, a)

        def d_eta(a: np.ndarray) -> np.ndarray:
            return np.einsum("qj,eijk->eiqk", ds, a)

        def d_tau(a: np.ndarray) -> np.ndarray:
            return np.einsum("rk,eijk->eijr", dt, a)

        row_t = d_tau(m.tau_t) + d_xi(m.xi_t) + d_eta(m.eta_t)
        row_x = d_xi(m.xi_x) + d_eta(m.eta_x)
        row_y = d_xi(m.xi_y) + d_eta(m.eta_y)
        return tuple(float(np.max(np.abs(r))) for r in (row_t, row_x, row_y))  # type: ignore[return-value]

    @staticmethod
    def metric_degrees(l: int, n: int) -> MetricDegrees:
        """Polynomial degrees in (xi, eta, tau) of |J| and the metric rows for Q^l x P^n geometry"""
        return MetricDegrees(
            det=(2 * l - 1, 2 * l - 1, 3 * n - 1),
            tau_t=(2 * l - 1, 2 * l - 1, 2 * n),
            xi_t=(2 * l, 2 * l - 1, 2 * n - 1),
            eta_t=(2 * l - 1, 2 * l, 2 * n - 1),
            xi_xy=(l, l - 1, 2 * n - 1),
            eta_xy=(l - 1, l, 2 * n - 1),
        )

    @staticmethod
    def flux_degrees(k: int, m: int, l: int, n: int) -> FluxDegrees:
        """Degrees of the hidden working variable |J|Q and its reference fluxes"""
        return FluxDegrees(
            working_space=k + 2 * l - 1,
            working_time=m + 3 * n - 1,
            flux_space=k + 2 * l - 1,
            flux_time=m + 3 * n - 1,
            correction_space=k + 2 * l,
            correction_time=m + 3 * n,
        )

    @staticmethod
    def classify_space(k: int, l: int, sp_space: int) -> SchemeLabel:
        if k >= 1 and sp_space >= k + 2 * l:
            return SchemeLabel.S
        if sp_space >= max(2 * l, k) + 1:
            return SchemeLabel.P
        return SchemeLabel.V

    @staticmethod
    def classify_time(m: int, n: int, sp_time: int) -> SchemeLabel:
        if sp_time >= m + 3 * n:
            return SchemeLabel.S
        if sp_time >= max(2 * n, m) + 1:
            return SchemeLabel.P
        return SchemeLabel.V

    @classmethod
    def classify_scheme(cls, k: int, m: int, l: int, n: int, sp_space: int, sp_time: int) -> SchemeClassification:
        """S when the hidden working variable is fully resolved, P when the metrics
        are, V otherwise; the overall label is the weaker of space and time"""
        for name, value in (("k", k), ("m", m)):
            if value < 0:
                raise InvalidArgumentError(f"{name} must be non-negative, got {value}")
        for name, value in (("l", l), ("n", n), ("sp_space", sp_space), ("sp_time", sp_time)):
            if value < 1:
                raise InvalidArgumentError(f"{name} must be positive, got {value}")
        return SchemeClassification(
            space=cls.classify_space(k, l, sp_space),
            time=cls.classify_time(m, n, sp_time),
        )
