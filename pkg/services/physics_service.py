import logging
from typing import Callable, Sequence, Tuple

import numpy as np

from errors import InadmissibleStateError, InvalidArgumentError, UnsupportedCaseError
from models import CaseConfig, ConservationLaw, InitialSettings

logger = logging.getLogger(__name__)

ExactSolution = Callable[[np.ndarray, np.ndarray, np.ndarray | float], np.ndarray]
Normal = Tuple[np.ndarray | float, np.ndarray | float]

DEFAULT_EULER_STATE = (1.0, 0.5, 0.3, 1.0)


class PhysicsService:
    """Service for conservation-law fluxes, common fluxes and exact solutions.

    States carry the variable index on the last axis.
    """

    @staticmethod
    def advection_flux(Q: np.ndarray, c: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        return c[0] * Q, c[1] * Q

    @staticmethod
    def primitives(Q: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        rho = Q[..., 0]
        u = Q[..., 1] / rho
        v = Q[..., 2] / rho
        p = (gamma - 1.0) * (Q[..., 3] - 0.5 * rho * (u * u + v * v))
        return rho, u, v, p

    @classmethod
    def check_admissible(cls, Q: np.ndarray, gamma: float) -> None:
        rho, _, _, p = cls.primitives(Q, gamma)
        bad = ~((rho > 0.0) & (p > 0.0))
        if np.any(bad):
            index = tuple(int(i) for i in np.argwhere(bad)[0])
            raise InadmissibleStateError(
                f"inadmissible Euler state (rho={float(rho[index]):.3e}, p={float(p[index]):.3e})", index
            )

    @classmethod
    def euler_flux(cls, Q: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
        cls.check_admissible(Q, gamma)
        rho, u, v, p = cls.primitives(Q, gamma)
        energy = Q[..., 3]
        F = np.stack([rho * u, rho * u * u + p, rho * u * v, (energy + p) * u], axis=-1)
        G = np.stack([rho * v, rho * u * v, rho * v * v + p, (energy + p) * v], axis=-1)
        return F, G

    @classmethod
    def flux(cls, Q: np.ndarray, law: ConservationLaw) -> Tuple[np.ndarray, np.ndarray]:
        if law.kind == "euler2d":
            return cls.euler_flux(Q, law.gamma)
        return cls.advection_flux(Q, law.velocity)

    @classmethod
    def max_wavespeed(
        cls, Q: np.ndarray, law: ConservationLaw, normal: Normal, grid_speed: np.ndarray | float = 0.0
    ) -> np.ndarray:
        """Largest |eigenvalue| of the normal flux Jacobian relative to a face moving with ``grid_speed``"""
        nx, ny = normal
        if law.kind == "euler2d":
            rho, u, v, p = cls.primitives(Q, law.gamma)
            return np.abs(u * nx + v * ny - grid_speed) + np.sqrt(law.gamma * p / rho)
        cx, cy = law.velocity
        return np.broadcast_to(np.abs(cx * nx + cy * ny - grid_speed), Q.shape[:-1])

    @classmethod
    def rusanov_flux(
        cls,
        Q_L: np.ndarray,
        Q_R: np.ndarray,
        normal: Normal,
        law: ConservationLaw,
        grid_speed: np.ndarray | float = 0.0,
    ) -> np.ndarray:
        """Local Lax-Friedrichs flux of F.n - v_n Q through a face with outward normal ``normal``"""
        nx, ny = (np.asarray(c, dtype=float)[..., None] for c in normal)
        vn = np.asarray(grid_speed, dtype=float)[..., None]
        FL, GL = cls.flux(Q_L, law)
        FR, GR = cls.flux(Q_R, law)
        flux_l = FL * nx + GL * ny - vn * Q_L
        flux_r = FR * nx + GR * ny - vn * Q_R
        lam = np.maximum(
            cls.max_wavespeed(Q_L, law, normal, grid_speed), cls.max_wavespeed(Q_R, law, normal, grid_speed)
        )[..., None]
        return 0.5 * (flux_l + flux_r) - 0.5 * lam * (Q_R - Q_L)

    @staticmethod
    def temporal_common_flux(Q_below: np.ndarray, Q_above: np.ndarray) -> np.ndarray:
        """Full upwinding in time: the state from the earlier side"""
        return Q_below

    # ------------------------------------------------------------ exact solutions

    @staticmethod
    def sine_wave_1d(
        x: np.ndarray, t: np.ndarray | float, c: float, wavenumber: float = 1.0, amplitude: float = 1.0
    ) -> np.ndarray:
        return amplitude * np.sin(2.0 * np.pi * wavenumber * (x - c * t))

    @staticmethod
    def plane_wave_2d(
        x: np.ndarray,
        y: np.ndarray,
        t: np.ndarray | float,
        c: Sequence[float],
        wavenumber: Sequence[float] = (1.0, 1.0),
        amplitude: float = 1.0,
    ) -> np.ndarray:
        phase = wavenumber[0] * (x - c[0] * t) + wavenumber[1] * (y - c[1] * t)
        return amplitude * np.sin(2.0 * np.pi * phase)

    @staticmethod
    def isentropic_vortex(
        x: np.ndarray,
        y: np.ndarray,
        t: np.ndarray | float,
        gamma: float = 1.4,
        strength: float = 5.0 / (2.0 * np.pi),
        center: Sequence[float] = (5.0, 5.0),
        mean_flow: Sequence[float] = (1.0, 1.0),
        period: Sequence[float] = (10.0, 10.0),
    ) -> np.ndarray:
        """Conservative state of the convected isentropic vortex, nearest periodic image"""
        dx = x - (center[0] + mean_flow[0] * t)
        dy = y - (center[1] + mean_flow[1] * t)
        dx = dx - period[0] * np.round(dx / period[0])
        dy = dy - period[1] * np.round(dy / period[1])
        r2 = dx * dx + dy * dy
        swirl = strength * np.exp(0.5 * (1.0 - r2))
        u = mean_flow[0] - swirl * dy
        v = mean_flow[1] + swirl * dx
        temperature = 1.0 - (gamma - 1.0) * strength**2 / (2.0 * gamma) * np.exp(1.0 - r2)
        rho = temperature ** (1.0 / (gamma - 1.0))
        p = rho * temperature
        return np.stack([rho, rho * u, rho * v, p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)], axis=-1)

    @staticmethod
    def conservative_state(primitive: Sequence[float], gamma: float) -> np.ndarray:
        rho, u, v, p = primitive
        if rho <= 0.0 or p <= 0.0:
            raise InvalidArgumentError(f"constant Euler state needs rho > 0 and p > 0, got {primitive}")
        return np.array([rho, rho * u, rho * v, p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)])

    @classmethod
    def constant_solution(cls, law: ConservationLaw, state: Sequence[float] | None = None) -> ExactSolution:
        if law.kind == "euler2d":
            value = cls.conservative_state(state or DEFAULT_EULER_STATE, law.gamma)
        else:
            value = np.array([float(state[0]) if state else 1.0])

        def solution(x: np.ndarray, y: np.ndarray, t: np.ndarray | float) -> np.ndarray:
            shape = np.broadcast(np.asarray(x), np.asarray(y), np.asarray(t)).shape
            return np.broadcast_to(value, shape + value.shape).copy()

        return solution

    @classmethod
    def exact_solution(cls, case: CaseConfig) -> ExactSolution:
        """Exact (and initial/boundary) solution of a case as a callable (x, y, t) -> (..., Nv)"""
        law, init = case.law, case.initial
        logger.debug("exact solution: %s with initial kind %s", law.kind, init.kind)
        if init.kind == "constant":
            return cls.constant_solution(law, init.state)
        if init.kind == "vortex":
            return cls._vortex(law, init, (case.mesh.lx, case.mesh.ly))
        if law.kind == "euler2d":
            raise UnsupportedCaseError("Euler cases use the vortex or a constant state")

        def wave(x: np.ndarray, y: np.ndarray, t: np.ndarray | float) -> np.ndarray:
            if law.kind == "advection1d":
                q = cls.sine_wave_1d(x, t, law.velocity[0], init.wavenumber[0], init.amplitude)
                q = q + 0.0 * y
            else:
                q = cls.plane_wave_2d(x, y, t, law.velocity, init.wavenumber, init.amplitude)
            return (q + init.offset)[..., None]

        return wave

    @classmethod
    def _vortex(cls, law: ConservationLaw, init: InitialSettings, period: Tuple[float, float]) -> ExactSolution:
        def vortex(x: np.ndarray, y: np.ndarray, t: np.ndarray | float) -> np.ndarray:
            return cls.isentropic_vortex(
                x, y, t, law.gamma, init.strength, init.center, init.mean_flow, period
            )

        return vortex
