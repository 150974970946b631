import logging
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre

from errors import InvalidArgumentError
from models import CorrectionFunctions, LagrangeBasis1D, ProjectionPair, Quadrature1D

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-15
NEWTON_MAX_ITERS = 100


def _legendre_with_derivative(degree: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """P_degree, P_(degree-1) and P'_degree at x by the three-term recurrence."""
    p_prev = np.ones_like(x)
    if degree == 0:
        return p_prev, np.zeros_like(x), np.zeros_like(x)
    p = x.copy()
    for j in range(2, degree + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = degree * (x * p - p_prev) / (x * x - 1.0)
    return p, p_prev, dp


def _freeze(*arrays: np.ndarray) -> None:
    for array in arrays:
        array.setflags(write=False)


class BasisService:
    """Service for 1D nodal bases, quadratures, correction functions and the projection filter"""

    @classmethod
    @lru_cache(maxsize=None)
    def gauss_legendre(cls, npts: int) -> Quadrature1D:
        """Gauss-Legendre points and weights, exact for polynomials of degree 2*npts - 1"""
        if npts < 1:
            raise InvalidArgumentError(f"Gauss-Legendre needs at least one point, got {npts}")

        # Chebyshev-Gauss nodes as the initial guess
        x = -np.cos(np.pi * (2.0 * np.arange(npts) + 1.0) / (2.0 * npts))
        for _ in range(NEWTON_MAX_ITERS):
            p, _, dp = _legendre_with_derivative(npts, x)
            dx = p / dp
            x = x - dx
            if np.max(np.abs(dx)) < NEWTON_TOL:
                break

        x = 0.5 * (x - x[::-1])
        _, _, dp = _legendre_with_derivative(npts, x)
        w = 2.0 / ((1.0 - x * x) * dp * dp)
        w = 0.5 * (w + w[::-1])
        _freeze(x, w)
        return Quadrature1D(points=x, weights=w)

    @classmethod
    @lru_cache(maxsize=None)
    def gauss_lobatto(cls, npts: int) -> Quadrature1D:
        """Gauss-Lobatto-Legendre points and weights, endpoints included"""
        if npts < 2:
            raise InvalidArgumentError(f"Gauss-Lobatto needs at least two points, got {npts}")

        N = npts - 1
        x = -np.cos(np.pi * np.arange(npts) / N)
        P = np.zeros((npts, npts))
        for _ in range(NEWTON_MAX_ITERS):
            x_old = x.copy()
            P[:, 0] = 1.0
            P[:, 1] = x
            for k in range(2, npts):
                P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
            x = x_old - (x * P[:, N] - P[:, N - 1]) / (npts * P[:, N])
            if np.max(np.abs(x - x_old)) < NEWTON_TOL:
                break

        x = 0.5 * (x - x[::-1])
        x[0], x[-1] = -1.0, 1.0
        p_n, _, _ = _legendre_with_derivative(N, x)
        w = 2.0 / (N * npts * p_n * p_n)
        _freeze(x, w)
        return Quadrature1D(points=x, weights=w)

    @classmethod
    def lagrange_basis(cls, nodes: Sequence[float]) -> LagrangeBasis1D:
        """Cardinal Lagrange basis on distinct nodes in [-1, 1]"""
        return cls._lagrange_basis(tuple(float(v) for v in np.asarray(nodes, dtype=float).ravel()))

    @classmethod
    @lru_cache(maxsize=None)
    def _lagrange_basis(cls, nodes: Tuple[float, ...]) -> LagrangeBasis1D:
        x = np.array(nodes, dtype=float)
        if x.size == 0:
            raise InvalidArgumentError("Lagrange basis needs at least one node")
        if np.unique(x).size != x.size:
            raise InvalidArgumentError(f"Lagrange nodes must be distinct: {nodes}")
        if np.any(np.abs(x) > 1.0 + 1e-14):
            raise InvalidArgumentError(f"Lagrange nodes must lie in [-1, 1]: {nodes}")

        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        bary = 1.0 / np.prod(diff, axis=1)

        D = (bary[None, :] / bary[:, None]) / diff
        np.fill_diagonal(D, 0.0)
        np.fill_diagonal(D, -D.sum(axis=1))

        basis = LagrangeBasis1D(nodes=x, bary_weights=bary, diff_matrix=D, boundary_rows=np.zeros((2, x.size)))
        rows = basis.evaluate(np.array([-1.0, 1.0]))
        _freeze(x, bary, D, rows)
        return basis.model_copy(update={"boundary_rows": rows})

    @classmethod
    def radau_correction(cls, degree: int, eval_nodes: Sequence[float]) -> CorrectionFunctions:
        """Right Radau correction functions g_L, g_R of ``degree`` and their derivatives at ``eval_nodes``"""
        return cls._radau_correction(int(degree), tuple(float(v) for v in np.asarray(eval_nodes, dtype=float).ravel()))

    @classmethod
    @lru_cache(maxsize=None)
    def _radau_correction(cls, degree: int, nodes: Tuple[float, ...]) -> CorrectionFunctions:
        if degree < 1:
            raise InvalidArgumentError(f"correction degree must be >= 1, got {degree}")
        g_left = cls.radau_polynomial(degree)
        dg_left = g_left.deriv()
        x = np.array(nodes, dtype=float)

        left = dg_left(x)
        right = -dg_left(-x)
        _freeze(x, left, right)
        return CorrectionFunctions(
            degree=degree,
            nodes=x,
            left_deriv=left,
            right_deriv=right,
            left_ends=(float(g_left(-1.0)), float(g_left(1.0))),
            right_ends=(float(g_left(1.0)), float(g_left(-1.0))),
        )

    @staticmethod
    def radau_polynomial(degree: int) -> legendre.Legendre:
        """g_L = ((-1)^d / 2)(P_d - P_(d-1)); g_R(x) = g_L(-x)."""
        return 0.5 * (-1) ** degree * (legendre.Legendre.basis(degree) - legendre.Legendre.basis(degree - 1))

    @classmethod
    def projection_pair(
        cls,
        high_space: int,
        high_time: int,
        low_space: int,
        low_time: int,
        theta: float = 1.0,
        filter_space: bool = True,
        filter_time: bool = True,
    ) -> ProjectionPair:
        """Projection operators between Gauss-Legendre sets given as point counts"""
        for name, high, low, active in (
            ("space", high_space, low_space, filter_space),
            ("time", high_time, low_time, filter_time),
        ):
            if low < 1 or high < 1:
                raise InvalidArgumentError(f"{name} point counts must be positive, got high={high} low={low}")
            if active and low >= high:
                raise InvalidArgumentError(f"{name} projection needs fewer low points than high, got {low} >= {high}")
            if not active and low != high:
                raise InvalidArgumentError(f"unfiltered {name} dimension must keep its points, got {low} != {high}")
        if not (filter_space or filter_time):
            raise InvalidArgumentError("projection pair must filter space, time or both")

        logger.debug(
            "projection pair %dx%d -> %dx%d (theta=%.3g)", high_space, high_time, low_space, low_time, theta
        )
        hs, ht = cls.gauss_legendre(high_space), cls.gauss_legendre(high_time)
        ls, lt = cls.gauss_legendre(low_space), cls.gauss_legendre(low_time)
        proj_s, lift_s = cls._projection_matrices(hs, ls)
        proj_t, lift_t = cls._projection_matrices(ht, lt)
        return ProjectionPair(
            high_space=hs,
            high_time=ht,
            low_space=ls,
            low_time=lt,
            theta=float(theta),
            filter_space=filter_space,
            filter_time=filter_time,
            proj_space=proj_s,
            proj_time=proj_t,
            lift_space=lift_s,
            lift_time=lift_t,
        )

    @classmethod
    def _projection_matrices(cls, high: Quadrature1D, low: Quadrature1D) -> Tuple[np.ndarray, np.ndarray]:
        lift = cls.lagrange_basis(low.points).evaluate(high.points)
        proj = lift.T * high.weights[None, :] / low.weights[:, None]
        return proj, lift

    @classmethod
    def _check_high_shape(cls, values_high: np.ndarray, pair: ProjectionPair) -> None:
        expected = (pair.high_space.npts, pair.high_space.npts, pair.high_time.npts)
        if values_high.shape[:3] != expected:
            raise InvalidArgumentError(f"field shape {values_high.shape[:3]} does not match projection pair {expected}")

    @classmethod
    def project_field(cls, values_high: np.ndarray, pair: ProjectionPair) -> np.ndarray:
        """Nodal values of the L2 projection onto the low space; trailing axes are carried along"""
        values_high = np.asarray(values_high, dtype=float)
        cls._check_high_shape(values_high, pair)
        return np.einsum(
            "ai,bj,ck,ijk...->abc...", pair.proj_space, pair.proj_space, pair.proj_time, values_high, optimize=True
        )

    @classmethod
    def lift_field(cls, values_low: np.ndarray, pair: ProjectionPair) -> np.ndarray:
        """Evaluate a low-space nodal tensor at the high nodes"""
        return np.einsum(
            "ia,jb,kc,abc...->ijk...", pair.lift_space, pair.lift_space, pair.lift_time, values_low, optimize=True
        )

    @classmethod
    def filter_field(cls, values_high: np.ndarray, pair: ProjectionPair, theta: float | None = None) -> np.ndarray:
        """Blend Q_L + theta (Q_H - Q_L) at the high nodes"""
        theta = pair.theta if theta is None else float(theta)
        if not 0.0 <= theta <= 1.0:
            raise InvalidArgumentError(f"filter strength theta must lie in [0, 1], got {theta}")
        values_high = np.asarray(values_high, dtype=float)
        if theta == 1.0:
            cls._check_high_shape(values_high, pair)
            return values_high.copy()
        low_at_high = cls.lift_field(cls.project_field(values_high, pair), pair)
        if theta == 0.0:
            return low_at_high
        return low_at_high + theta * (values_high - low_at_high)

    @classmethod
    def difference_energy(cls, values_high: np.ndarray, pair: ProjectionPair) -> float | np.ndarray:
        """Integral of (Q_H - Q_L)^2 over the reference element, per trailing variable"""
        values_high = np.asarray(values_high, dtype=float)
        delta = values_high - cls.lift_field(cls.project_field(values_high, pair), pair)
        ws, wt = pair.high_space.weights, pair.high_time.weights
        energy = np.einsum("i,j,k,ijk...->...", ws, ws, wt, delta * delta)
        return float(energy) if np.ndim(energy) == 0 else energy

    @classmethod
    def interpolate_tensor(
        cls,
        values: np.ndarray,
        space_nodes: Sequence[float],
        time_nodes: Sequence[float],
        xi: Sequence[float],
        eta: Sequence[float],
        tau: Sequence[float],
    ) -> np.ndarray:
        """Evaluate a nodal tensor (ns, ns, nt, ...) on the tensor grid xi x eta x tau"""
        space = cls.lagrange_basis(space_nodes)
        time = cls.lagrange_basis(time_nodes)
        return np.einsum(
            "pi,qj,rk,ijk...->pqr...",
            space.evaluate(np.asarray(xi)),
            space.evaluate(np.asarray(eta)),
            time.evaluate(np.asarray(tau)),
            values,
            optimize=True,
        )
