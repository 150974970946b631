"""
Tests for fluxes, the Rusanov common flux and exact solutions
"""

import numpy as np
import pytest

from errors import InadmissibleStateError, InvalidArgumentError, UnsupportedCaseError
from models import CaseConfig, ConservationLaw
from services.physics_service import PhysicsService

EULER = ConservationLaw(kind="euler2d", gamma=1.4)
ADVECTION = ConservationLaw(kind="advection2d", velocity=(0.8, -0.3))


def random_euler_states(rng, count):
    rho = rng.uniform(0.5, 2.0, count)
    u, v = rng.uniform(-1.0, 1.0, count), rng.uniform(-1.0, 1.0, count)
    p = rng.uniform(0.5, 2.0, count)
    return np.stack([rho, rho * u, rho * v, p / 0.4 + 0.5 * rho * (u * u + v * v)], axis=-1)


def random_normals(rng, count):
    angle = rng.uniform(0.0, 2 * np.pi, count)
    return np.cos(angle), np.sin(angle)


def scalar_rusanov(ql, qr, nx, ny, c, vn):
    """Point-by-point reference implementation"""
    an = c[0] * nx + c[1] * ny - vn
    return 0.5 * an * (ql + qr) - 0.5 * abs(an) * (qr - ql)


def test_euler_flux_of_fluid_at_rest():
    Q = PhysicsService.conservative_state((1.2, 0.0, 0.0, 0.9), 1.4)
    F, G = PhysicsService.euler_flux(Q, 1.4)
    np.testing.assert_allclose(F, [0.0, 0.9, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(G, [0.0, 0.0, 0.9, 0.0], atol=1e-15)


def test_inadmissible_state_reports_index():
    Q = random_euler_states(np.random.default_rng(0), 6).reshape(2, 3, 4)
    Q[1, 2, 0] = -0.1
    with pytest.raises(InadmissibleStateError) as info:
        PhysicsService.flux(Q, EULER)
    assert info.value.index == (1, 2)


@pytest.mark.parametrize("law", [EULER, ADVECTION], ids=["euler", "advection"])
def test_rusanov_is_consistent(law):
    rng = np.random.default_rng(1)
    Q = random_euler_states(rng, 50) if law.kind == "euler2d" else rng.standard_normal((50, 1))
    nx, ny = random_normals(rng, 50)
    vn = rng.uniform(-0.5, 0.5, 50)
    F, G = PhysicsService.flux(Q, law)
    expected = F * nx[:, None] + G * ny[:, None] - vn[:, None] * Q
    np.testing.assert_allclose(PhysicsService.rusanov_flux(Q, Q, (nx, ny), law, vn), expected, atol=1e-13)


@pytest.mark.parametrize("law", [EULER, ADVECTION], ids=["euler", "advection"])
def test_rusanov_is_single_valued_across_a_face(law):
    rng = np.random.default_rng(2)
    if law.kind == "euler2d":
        QL, QR = random_euler_states(rng, 40), random_euler_states(rng, 40)
    else:
        QL, QR = rng.standard_normal((40, 1)), rng.standard_normal((40, 1))
    nx, ny = random_normals(rng, 40)
    vn = rng.uniform(-0.5, 0.5, 40)
    forward = PhysicsService.rusanov_flux(QL, QR, (nx, ny), law, vn)
    backward = PhysicsService.rusanov_flux(QR, QL, (-nx, -ny), law, -vn)
    np.testing.assert_allclose(forward, -backward, atol=1e-13)


def test_rusanov_matches_pointwise_reference():
    rng = np.random.default_rng(4)
    QL, QR = rng.standard_normal((30, 1)), rng.standard_normal((30, 1))
    nx, ny = random_normals(rng, 30)
    vn = rng.uniform(-1.0, 1.0, 30)
    got = PhysicsService.rusanov_flux(QL, QR, (nx, ny), ADVECTION, vn)[:, 0]
    for i in range(30):
        ref = scalar_rusanov(QL[i, 0], QR[i, 0], nx[i], ny[i], ADVECTION.velocity, vn[i])
        assert got[i] == pytest.approx(ref, abs=1e-14)


def test_rusanov_without_grid_speed_reduces_to_upwind():
    law = ConservationLaw(kind="advection1d", velocity=(2.0, 0.0))
    QL, QR = np.array([[1.0]]), np.array([[3.0]])
    assert PhysicsService.rusanov_flux(QL, QR, (1.0, 0.0), law)[0, 0] == pytest.approx(2.0)
    assert PhysicsService.rusanov_flux(QL, QR, (-1.0, 0.0), law)[0, 0] == pytest.approx(-6.0)


def test_euler_wavespeed_includes_sound_speed():
    Q = PhysicsService.conservative_state((1.0, 0.5, 0.0, 1.0 / 1.4), 1.4)
    assert float(PhysicsService.max_wavespeed(Q, EULER, (1.0, 0.0))) == pytest.approx(1.5)
    assert float(PhysicsService.max_wavespeed(Q, EULER, (1.0, 0.0), 0.5)) == pytest.approx(1.0)


def test_temporal_common_flux_is_upwind_in_time():
    below, above = np.array([1.0]), np.array([5.0])
    assert PhysicsService.temporal_common_flux(below, above) is below


def test_conservative_state_rejects_negative_pressure():
    with pytest.raises(InvalidArgumentError):
        PhysicsService.conservative_state((1.0, 0.0, 0.0, -1.0), 1.4)


def test_vortex_is_periodic_and_decays_to_freestream():
    x, y = np.array([0.3, 9.7]), np.array([4.0, 6.0])
    a = PhysicsService.isentropic_vortex(x, y, 0.7)
    b = PhysicsService.isentropic_vortex(x + 10.0, y - 10.0, 0.7)
    np.testing.assert_allclose(a, b, atol=1e-14)

    far = PhysicsService.isentropic_vortex(np.array([0.0]), np.array([0.0]), 0.0)[0]
    free = PhysicsService.conservative_state((1.0, 1.0, 1.0, 1.0), 1.4)
    np.testing.assert_allclose(far, free, atol=1e-4)


def test_vortex_translates_with_mean_flow():
    x, y = np.array([4.2, 5.5]), np.array([5.1, 3.9])
    later = PhysicsService.isentropic_vortex(x + 0.5, y + 0.5, 0.5)
    np.testing.assert_allclose(later, PhysicsService.isentropic_vortex(x, y, 0.0), atol=1e-14)


def test_vortex_is_isentropic():
    x, y = np.meshgrid(np.linspace(0.0, 10.0, 50), np.linspace(0.0, 10.0, 50))
    rho, _, _, p = PhysicsService.primitives(PhysicsService.isentropic_vortex(x, y, 0.3), 1.4)
    entropy = p / rho**1.4
    assert float(np.min(rho)) < 0.9
    np.testing.assert_allclose(entropy, entropy.flat[0], rtol=1e-12)


def test_exact_solution_dispatch():
    wave = CaseConfig.model_validate(
        {"law": {"kind": "advection2d", "velocity": (1.0, 2.0)}, "initial": {"wavenumber": (1.0, 1.0), "offset": 1.0}}
    )
    sol = PhysicsService.exact_solution(wave)
    x, y = np.array([0.1, 0.4]), np.array([0.2, 0.8])
    expected = 1.0 + np.sin(2 * np.pi * ((x - 0.3) + (y - 0.6)))
    np.testing.assert_allclose(sol(x, y, 0.3)[:, 0], expected, atol=1e-14)

    const = CaseConfig.model_validate({"law": {"kind": "euler2d"}, "initial": {"kind": "constant"}})
    values = PhysicsService.exact_solution(const)(np.zeros((2, 3)), np.zeros((2, 3)), 0.0)
    assert values.shape == (2, 3, 4)
    np.testing.assert_allclose(values[1, 2], PhysicsService.conservative_state((1.0, 0.5, 0.3, 1.0), 1.4))


def test_euler_wave_is_unsupported():
    case = CaseConfig.model_construct(
        law=EULER, initial=CaseConfig().initial, mesh=CaseConfig().mesh
    )
    with pytest.raises(UnsupportedCaseError):
        PhysicsService.exact_solution(case)
