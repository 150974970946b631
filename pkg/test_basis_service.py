"""
Tests for quadratures, Lagrange bases, correction functions and the projection filter
"""

import numpy as np
import pytest

from errors import InvalidArgumentError
from services.basis_service import BasisService


def monomial_integral(p: int) -> float:
    return 0.0 if p % 2 else 2.0 / (p + 1)


@pytest.mark.parametrize("npts", range(1, 10))
def test_gauss_legendre_exact_to_degree_2n_minus_1(npts):
    quad = BasisService.gauss_legendre(npts)
    assert quad.npts == npts
    assert np.all(np.diff(quad.points) > 0)
    for p in range(2 * npts):
        assert abs(quad.weights @ quad.points**p - monomial_integral(p)) < 1e-13


def test_gauss_legendre_single_point():
    quad = BasisService.gauss_legendre(1)
    np.testing.assert_allclose(quad.points, [0.0], atol=1e-16)
    np.testing.assert_allclose(quad.weights, [2.0])


@pytest.mark.parametrize("npts", range(2, 10))
def test_gauss_lobatto_endpoints_and_exactness(npts):
    quad = BasisService.gauss_lobatto(npts)
    assert quad.points[0] == -1.0 and quad.points[-1] == 1.0
    for p in range(2 * npts - 2):
        assert abs(quad.weights @ quad.points**p - monomial_integral(p)) < 1e-13


def test_quadrature_rejects_too_few_points():
    with pytest.raises(InvalidArgumentError):
        BasisService.gauss_legendre(0)
    with pytest.raises(InvalidArgumentError):
        BasisService.gauss_lobatto(1)


@pytest.mark.parametrize("npts", [1, 2, 3, 5, 8])
def test_lagrange_cardinality_and_partition_of_unity(npts):
    nodes = BasisService.gauss_legendre(npts).points
    basis = BasisService.lagrange_basis(nodes)
    np.testing.assert_allclose(basis.evaluate(nodes), np.eye(npts), atol=1e-14)

    xi = np.random.default_rng(7).uniform(-1.0, 1.0, 25)
    np.testing.assert_allclose(basis.evaluate(xi).sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(basis.diff_matrix.sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("npts", [2, 4, 6])
def test_differentiation_exact_for_degree_n_minus_1(npts):
    nodes = BasisService.gauss_legendre(npts).points
    basis = BasisService.lagrange_basis(nodes)
    coeffs = np.arange(1.0, npts + 1.0)
    poly = np.polynomial.Polynomial(coeffs)
    np.testing.assert_allclose(basis.diff_matrix @ poly(nodes), poly.deriv()(nodes), atol=1e-11)

    xi = np.linspace(-1.0, 1.0, 11)
    np.testing.assert_allclose(basis.derivative(xi) @ poly(nodes), poly.deriv()(xi), atol=1e-10)
    np.testing.assert_allclose(basis.boundary_rows @ poly(nodes), poly(np.array([-1.0, 1.0])), atol=1e-12)


def test_lagrange_rejects_repeated_or_outside_nodes():
    with pytest.raises(InvalidArgumentError):
        BasisService.lagrange_basis([0.0, 0.5, 0.5])
    with pytest.raises(InvalidArgumentError):
        BasisService.lagrange_basis([-1.5, 0.0])


def test_linear_radau_correction():
    nodes = BasisService.gauss_legendre(3).points
    corr = BasisService.radau_correction(1, nodes)
    # g_L = (1 - xi) / 2
    np.testing.assert_allclose(corr.left_deriv, -0.5)
    np.testing.assert_allclose(corr.right_deriv, 0.5)
    assert corr.left_ends == pytest.approx((1.0, 0.0))
    assert corr.right_ends == pytest.approx((0.0, 1.0))


@pytest.mark.parametrize("degree", [1, 2, 3, 4, 6])
def test_radau_endpoints_and_mirror_symmetry(degree):
    g_left = BasisService.radau_polynomial(degree)
    assert g_left.degree() == degree
    assert g_left(-1.0) == pytest.approx(1.0, abs=1e-14)
    assert g_left(1.0) == pytest.approx(0.0, abs=1e-14)

    nodes = BasisService.gauss_legendre(degree).points
    corr = BasisService.radau_correction(degree, nodes)
    np.testing.assert_allclose(corr.right_deriv, -corr.left_deriv[::-1], atol=1e-12)


def test_radau_correction_degree_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        BasisService.radau_correction(0, [0.0])


def test_difference_energy_of_quadratic():
    pair = BasisService.projection_pair(3, 2, 2, 1)
    xs = pair.high_space.points
    values = np.broadcast_to(xs[:, None, None] ** 2, (3, 3, 2)).copy()
    # (xi^2 - 1/3)^2 integrated over [-1, 1], times the eta and tau lengths
    assert BasisService.difference_energy(values, pair) == pytest.approx(32.0 / 45.0, rel=1e-13)


def test_projection_reproduces_low_polynomials():
    pair = BasisService.projection_pair(5, 4, 3, 2)
    xs, ts = pair.high_space.points, pair.high_time.points
    poly = lambda x, y, t: 1.0 + x - 2.0 * x * y + 0.5 * y**2 + 3.0 * t  # noqa: E731
    high = poly(xs[:, None, None], xs[None, :, None], ts[None, None, :])
    ls, lt = pair.low_space.points, pair.low_time.points
    low = poly(ls[:, None, None], ls[None, :, None], lt[None, None, :])
    np.testing.assert_allclose(BasisService.project_field(high, pair), low, atol=1e-13)
    np.testing.assert_allclose(BasisService.filter_field(high, pair, 0.3), high, atol=1e-13)


def test_filter_endpoints_and_energy_scaling():
    rng = np.random.default_rng(3)
    pair = BasisService.projection_pair(5, 4, 3, 2, theta=0.5)
    values = rng.standard_normal((5, 5, 4, 2))

    np.testing.assert_array_equal(BasisService.filter_field(values, pair, 1.0), values)
    low = BasisService.lift_field(BasisService.project_field(values, pair), pair)
    np.testing.assert_allclose(BasisService.filter_field(values, pair, 0.0), low, atol=1e-13)

    base = BasisService.difference_energy(values, pair)
    for theta in (0.0, 0.3, 0.9, 1.0):
        filtered = BasisService.difference_energy(BasisService.filter_field(values, pair, theta), pair)
        np.testing.assert_allclose(filtered, theta**2 * base, rtol=1e-12, atol=1e-28)

    # theta from the pair when not given
    np.testing.assert_allclose(
        BasisService.filter_field(values, pair), BasisService.filter_field(values, pair, 0.5), atol=0
    )


def test_full_strength_filter_is_idempotent():
    rng = np.random.default_rng(11)
    pair = BasisService.projection_pair(5, 4, 3, 2)
    once = BasisService.filter_field(rng.standard_normal((5, 5, 4, 3)), pair, 0.0)
    np.testing.assert_allclose(BasisService.filter_field(once, pair, 0.0), once, atol=1e-13)


def test_space_only_projection_leaves_time_untouched():
    pair = BasisService.projection_pair(4, 3, 3, 3, filter_time=False)
    np.testing.assert_allclose(pair.proj_time, np.eye(3), atol=1e-14)
    ts = pair.high_time.points
    values = np.broadcast_to(ts[None, None, :] ** 2, (4, 4, 3))
    assert BasisService.difference_energy(values, pair) == pytest.approx(0.0, abs=1e-28)


@pytest.mark.parametrize(
    "counts, flags",
    [
        ((3, 3, 3, 2), {}),
        ((3, 3, 2, 3), {}),
        ((3, 3, 2, 2), {"filter_time": False}),
        ((3, 3, 3, 3), {"filter_space": False, "filter_time": False}),
        ((3, 3, 0, 2), {}),
    ],
)
def test_projection_pair_validation(counts, flags):
    with pytest.raises(InvalidArgumentError):
        BasisService.projection_pair(*counts, **flags)


def test_filter_rejects_theta_outside_unit_interval():
    pair = BasisService.projection_pair(3, 3, 2, 2)
    with pytest.raises(InvalidArgumentError):
        BasisService.filter_field(np.zeros((3, 3, 3)), pair, 1.5)
    with pytest.raises(InvalidArgumentError):
        BasisService.project_field(np.zeros((4, 3, 3)), pair)


def test_interpolate_tensor_reproduces_polynomial():
    xs = BasisService.gauss_legendre(3).points
    ts = BasisService.gauss_legendre(2).points
    poly = lambda x, y, t: x**2 - y + x * y * t  # noqa: E731
    values = poly(xs[:, None, None], xs[None, :, None], ts[None, None, :])
    pts = np.array([-1.0, 0.3, 0.9])
    expected = poly(pts[:, None, None], pts[None, :, None], pts[None, None, :])
    np.testing.assert_allclose(BasisService.interpolate_tensor(values, xs, ts, pts, pts, pts), expected, atol=1e-13)
