"""
Tests for space-time mappings, metric terms, the discrete GCL and scheme classification
"""

import numpy as np
import pytest

from errors import DegenerateElementError, InvalidArgumentError
from models import MeshSettings, MotionLaw, SchemeLabel, SpaceTimeElement
from services.basis_service import BasisService
from services.geometry_service import GeometryService
from services.mesh_service import MeshService
from services.verification_service import VerificationService

S, P, V = SchemeLabel.S, SchemeLabel.P, SchemeLabel.V


def deforming_slab(l=2, n=2, nx=4, t_start=0.05, dt=0.1):
    motion = MotionLaw(kind="sym_deform")
    mesh = MeshService.build_square_mesh(nx, nx, l, motion)
    return MeshService.build_slab(mesh, motion, t_start, dt, n)


def disk_slab(l=2, n=2, t_start=0.5, dt=0.5):
    motion = MotionLaw(kind="circular")
    mesh = MeshService.build_disk_mesh(1, l, motion)
    return MeshService.build_slab(mesh, motion, t_start, dt, n)


def test_affine_stationary_metrics():
    mesh = MeshService.build_square_mesh(2, 2, 1)
    slab = MeshService.build_slab(mesh, None, 0.0, 0.1, 1)
    entries = GeometryService.metrics_nonconservative(slab.element(3), (0.2, -0.4, 0.7))
    # h = 0.5, so x_xi = y_eta = 0.25 and t_tau = 0.05
    assert float(entries.det) == pytest.approx(0.05 * 0.25 * 0.25)
    assert float(entries.tau_t) == pytest.approx(0.0625)
    assert float(entries.xi_x) == pytest.approx(0.0125)
    assert float(entries.eta_y) == pytest.approx(0.0125)
    for name in ("xi_t", "eta_t", "xi_y", "eta_x"):
        assert float(getattr(entries, name)) == pytest.approx(0.0, abs=1e-16)


def test_geometry_maps_position():
    mesh = MeshService.build_square_mesh(2, 2, 1)
    slab = MeshService.build_slab(mesh, None, 1.0, 0.5, 1)
    maps = GeometryService.geometry_maps(slab.element(1), (1.0, -1.0, -1.0))
    assert (maps["t"], maps["x"], maps["y"]) == pytest.approx((1.5, 0.5, 0.0))


@pytest.mark.parametrize("ref_pt", [(0.3, -0.2, 0.6), (-1.0, 1.0, 0.0), (0.9, 0.1, -0.8)])
def test_metric_matrix_inverts_jacobian(ref_pt):
    elem = disk_slab().element(7)
    entries = GeometryService.metrics_nonconservative(elem, ref_pt)
    jac = GeometryService.jacobian_matrix(GeometryService.geometry_maps(elem, ref_pt))
    product = GeometryService.metric_matrix(entries) @ jac
    det = float(entries.det)
    assert det == pytest.approx(np.linalg.det(jac), rel=1e-12)
    np.testing.assert_allclose(product, det * np.eye(3), atol=1e-13 * abs(det) + 1e-15)


def test_partials_match_finite_differences():
    elem = deforming_slab(nx=2).element(1)
    ref = np.array([0.1, -0.3, 0.45])
    h = 1e-6
    maps = GeometryService.geometry_maps(elem, ref)
    for axis, suffix in enumerate(("tau", "xi", "eta")):
        step = np.zeros(3)
        step[axis] = h
        plus = GeometryService.geometry_maps(elem, ref + step)
        minus = GeometryService.geometry_maps(elem, ref - step)
        for name in ("x", "y"):
            fd = (plus[name] - minus[name]) / (2 * h)
            assert maps[f"{name}_{suffix}"] == pytest.approx(fd, abs=1e-8)


def random_quadratic_element(rng, index):
    nodes = BasisService.gauss_lobatto(3).points
    xi, eta = np.meshgrid(nodes, nodes, indexing="ij")
    xy = np.empty((3, 3, 3, 2))
    for k in range(3):
        xy[:, :, k, 0] = 0.15 * (1.0 + xi) + 0.01 * rng.standard_normal((3, 3))
        xy[:, :, k, 1] = 0.15 * (1.0 + eta) + 0.01 * rng.standard_normal((3, 3))
    t0 = rng.uniform(0.0, 1.0)
    return SpaceTimeElement(l=2, n=2, xy_nodes=xy, t_nodes=t0 + 0.05 * (1.0 + nodes), index=index)


def test_metrics_of_random_quadratic_elements_match_central_differences():
    rng = np.random.default_rng(7)
    h = 1e-5
    names = ("tau_t", "xi_t", "eta_t", "xi_x", "xi_y", "eta_x", "eta_y")
    for index in range(50):
        elem = random_quadratic_element(rng, index)
        ref = rng.uniform(-0.9, 0.9, 3)
        exact = GeometryService.metrics_nonconservative(elem, ref)
        fd = {}
        for axis, suffix in enumerate(("tau", "xi", "eta")):
            step = np.zeros(3)
            step[axis] = h
            plus = GeometryService.geometry_maps(elem, ref + step)
            minus = GeometryService.geometry_maps(elem, ref - step)
            for name in ("t", "x", "y"):
                fd[f"{name}_{suffix}"] = np.array([(plus[name] - minus[name]) / (2 * h)])
        approx = GeometryService.metrics_from_partials(fd)
        scale = max(abs(float(getattr(exact, name).ravel()[0])) for name in names)
        for name in names:
            gap = abs(float(getattr(approx, name).ravel()[0]) - float(getattr(exact, name).ravel()[0]))
            assert gap <= 1e-7 * scale, (index, name)


def test_inverted_element_is_degenerate():
    slab = MeshService.build_slab(MeshService.build_square_mesh(1, 1, 1), None, 0.0, 0.1, 1)
    elem = slab.element(0)
    flipped = SpaceTimeElement(l=1, n=1, xy_nodes=elem.xy_nodes[::-1].copy(), t_nodes=elem.t_nodes, index=4)
    with pytest.raises(DegenerateElementError) as info:
        GeometryService.metrics_nonconservative(flipped, (0.0, 0.0, 0.0))
    assert info.value.element == 4
    assert info.value.det < 0


def test_reference_point_outside_cube_is_rejected():
    elem = deforming_slab(nx=2).element(0)
    with pytest.raises(InvalidArgumentError):
        GeometryService.metrics_nonconservative(elem, (0.0, 1.5, 0.0))


def test_face_flux_scaling_signs_and_area():
    slab = MeshService.build_slab(MeshService.build_square_mesh(2, 2, 1), None, 0.0, 0.1, 1)
    elem = slab.element(0)
    assert GeometryService.face_flux_scaling(elem, "xi+", (0.0, 1.0, 0.3)) == pytest.approx(0.0125)
    assert GeometryService.face_flux_scaling(elem, "xi-", (0.0, -1.0, 0.3)) == pytest.approx(-0.0125)
    assert GeometryService.face_flux_scaling(elem, "tau+", (1.0, 0.2, 0.3)) == pytest.approx(0.0625)
    with pytest.raises(InvalidArgumentError):
        GeometryService.face_flux_scaling(elem, "xi+", (0.0, 0.5, 0.3))
    with pytest.raises(InvalidArgumentError):
        GeometryService.face_flux_scaling(elem, "zeta+", (0.0, 1.0, 0.3))


def test_moving_face_scaling_is_cross_product_of_face_tangents():
    elem = disk_slab().element(9)
    ref = (0.2, 1.0, -0.35)
    maps = GeometryService.geometry_maps(elem, ref)
    # the xi face is spanned by d/dtau and d/deta of (t, x, y)
    d_tau = np.array([maps["t_tau"], maps["x_tau"], maps["y_tau"]])
    d_eta = np.array([0.0, maps["x_eta"], maps["y_eta"]])
    area = np.linalg.norm(np.cross(d_tau, d_eta))
    assert GeometryService.face_flux_scaling(elem, "xi+", ref) == pytest.approx(area, rel=1e-12)


def test_metric_cache_shapes_and_face_normals():
    slab = deforming_slab(nx=2)
    cache = GeometryService.metric_cache(slab, 3, 2)
    assert cache.solution.det.shape == (4, 3, 3, 2)
    assert cache.faces["xi-"].row_x.shape == (4, 3, 2)
    assert cache.faces["tau+"].det.shape == (4, 3, 3)
    face = cache.faces["eta+"]
    np.testing.assert_allclose(face.normal_x**2 + face.normal_y**2, 1.0, atol=1e-14)
    assert np.all(face.spatial_fraction <= 1.0 + 1e-15)
    assert np.all(cache.faces["tau-"].scaling < 0) and np.all(cache.faces["tau+"].scaling > 0)


def test_stationary_affine_gcl_is_roundoff():
    slab = MeshService.build_slab(MeshService.build_square_mesh(3, 3, 1), None, 0.0, 0.1, 1)
    assert max(GeometryService.gcl_residual_nodes(slab.xy_nodes, slab.t_nodes, 2, 2)) <= 1e-14


@pytest.mark.parametrize("l, n", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_resolved_sampling_satisfies_gcl(l, n):
    for slab in (deforming_slab(l, n), disk_slab(l, n)):
        for alpha, beta in ((2 * l, 2 * n), (2 * l + 1, 2 * n + 2)):
            assert max(GeometryService.gcl_residual(slab.element(2), alpha, beta)) <= 1e-11
            assert max(GeometryService.gcl_residual_nodes(slab.xy_nodes, slab.t_nodes, alpha, beta)) <= 1e-11


def test_under_resolved_time_sampling_is_flagged():
    rows = VerificationService.gcl_campaign(
        MotionLaw(kind="circular"),
        [(2, 2)],
        [(0, -1), (0, 0)],
        MeshSettings(kind="disk", levels=1, boundary="analytic"),
        t_start=0.5,
        dt=0.5,
    )
    under, resolved = rows
    assert under.flagged and not resolved.flagged
    assert max(under.res_time, under.res_x, under.res_y) > 1e-6
    assert resolved.within_tol and resolved.passed and under.passed


def test_quadratic_time_motion_sampled_at_degree_two_breaks_time_gcl():
    slab = disk_slab(2, 2)
    res_time, res_x, res_y = GeometryService.gcl_residual_nodes(slab.xy_nodes, slab.t_nodes, 2, 2)
    assert res_time > 1e-6
    assert max(res_x, res_y) <= 1e-11


def test_gcl_rejects_negative_degrees():
    slab = deforming_slab(nx=2)
    with pytest.raises(InvalidArgumentError):
        GeometryService.gcl_residual_nodes(slab.xy_nodes, slab.t_nodes, -1, 2)


def test_metric_and_flux_degrees():
    deg = GeometryService.metric_degrees(2, 1)
    assert deg.det == (3, 3, 2)
    assert deg.xi_t == (4, 3, 1)
    assert deg.xi_xy == (2, 1, 1)
    flux = GeometryService.flux_degrees(3, 2, 1, 1)
    assert flux.correction_space == 5 and flux.correction_time == 5


# label tables for linear (l = n = 1) and quadratic (l = n = 2) space-time elements
@pytest.mark.parametrize(
    "k, expected",
    [(2, {3: P, 4: S}), (3, {4: P, 5: S}), (4, {5: P, 6: S})],
)
def test_space_labels_linear_elements(k, expected):
    for sp, label in expected.items():
        assert GeometryService.classify_space(k, 1, sp) == label


@pytest.mark.parametrize("m, expected", [(1, {2: V, 3: P, 4: S}), (2, {3: P, 4: P, 5: S})])
def test_time_labels_linear_elements(m, expected):
    for sp, label in expected.items():
        assert GeometryService.classify_time(m, 1, sp) == label


@pytest.mark.parametrize(
    "k, expected",
    [
        (2, {3: V, 4: V, 5: P, 6: S}),
        (3, {4: V, 5: P, 6: P, 7: S}),
        (4, {5: P, 6: P, 7: P, 8: S}),
    ],
)
def test_space_labels_quadratic_elements(k, expected):
    for sp, label in expected.items():
        assert GeometryService.classify_space(k, 2, sp) == label


@pytest.mark.parametrize(
    "m, expected",
    [
        (1, {2: V, 3: V, 4: V, 5: P, 6: P, 7: S}),
        (2, {3: V, 4: V, 5: P, 6: P, 7: P, 8: S}),
    ],
)
def test_time_labels_quadratic_elements(m, expected):
    for sp, label in expected.items():
        assert GeometryService.classify_time(m, 2, sp) == label


def test_scheme_label_is_the_weaker_dimension():
    result = GeometryService.classify_scheme(2, 1, 1, 1, 4, 2)
    assert (result.space, result.time, result.label) == (S, V, V)
    result = GeometryService.classify_scheme(2, 2, 1, 1, 4, 3)
    assert result.label == P


def test_s_label_needs_positive_k():
    assert GeometryService.classify_space(0, 1, 10) == P


def test_labels_never_weaken_with_more_points():
    for l in (1, 2, 3):
        for k in range(0, 6):
            ranks = [GeometryService.classify_space(k, l, sp).rank for sp in range(1, 16)]
            assert ranks == sorted(ranks), (k, l)
    for n in (1, 2, 3):
        for m in range(0, 6):
            ranks = [GeometryService.classify_time(m, n, sp).rank for sp in range(1, 16)]
            assert ranks == sorted(ranks), (m, n)


def test_classification_rejects_bad_degrees():
    with pytest.raises(InvalidArgumentError):
        GeometryService.classify_scheme(-1, 1, 1, 1, 3, 3)
    with pytest.raises(InvalidArgumentError):
        GeometryService.classify_scheme(1, 1, 0, 1, 3, 3)
