"""
Tests for error norms, rates, ladders, GCL campaigns and table output
"""

import math

import numpy as np
import pytest

from errors import InvalidArgumentError, UnsupportedCaseError
from models import CaseConfig, ConvergenceRow, MeshSettings, MotionLaw
from services.basis_service import BasisService
from services.geometry_service import GeometryService
from services.mesh_service import MeshService
from services.verification_service import TABLE_COLUMNS, VerificationService


def test_compute_rates_by_hand():
    rates = VerificationService.compute_rates([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6.25e-4])
    assert rates[0] is None
    assert rates[1] == pytest.approx(2.0)
    assert rates[2] == pytest.approx(2.0)


def test_rates_undefined_at_roundoff_level():
    rates = VerificationService.compute_rates([0.1, 0.05, 0.025], [1e-13, 1e-15, 2e-16])
    assert rates == [None, None, None]


def test_l2_error_of_interpolated_linear_field_is_zero():
    mesh = MeshService.build_square_mesh(2, 2, 2, MotionLaw(kind="sym_deform"))
    slab = MeshService.build_slab(mesh, MotionLaw(kind="sym_deform"), 0.0, 0.1, 2)
    pts = BasisService.gauss_legendre(3).points
    p = GeometryService.partials(slab.xy_nodes, slab.t_nodes, pts, pts, [1.0])
    trace = (2.0 * p["x"] - p["y"])[..., 0, None]
    exact = lambda x, y, t: (2.0 * x - y)[..., None]  # noqa: E731
    # x is quadratic in xi on a deformed element, so sp = 3 reproduces it
    assert VerificationService.l2_error(trace, slab, exact) <= 1e-13


def test_l2_error_matches_brute_force_quadrature():
    mesh = MeshService.build_square_mesh(2, 1, 1)
    slab = MeshService.build_slab(mesh, None, 0.0, 0.1, 1)
    trace = np.zeros((2, 2, 2, 1))
    exact = lambda x, y, t: np.sin(2 * np.pi * x)[..., None]  # noqa: E731
    err = VerificationService.l2_error(trace, slab, exact, n_quad=20)
    # over the unit square the mean of sin^2 is 1/2
    assert err == pytest.approx(math.sqrt(0.5), rel=1e-12)

    xs = (np.arange(50) + 0.5) / 50
    midpoint = math.sqrt(np.mean(np.sin(2 * np.pi * xs) ** 2))
    assert err == pytest.approx(midpoint, rel=1e-3)


def test_dense_projection_matches_tensor_projection():
    pair = BasisService.projection_pair(5, 4, 3, 2)
    values = np.random.default_rng(11).standard_normal((5, 5, 4))
    dense = VerificationService.dense_projection(values, 5, 4, 3, 2)
    np.testing.assert_allclose(BasisService.project_field(values, pair), dense, atol=1e-12)


def test_refinement_helpers():
    case = CaseConfig.model_validate({"law": {"kind": "advection2d"}, "mesh": {"nx": 4, "ny": 2}})
    finer = VerificationService.refine_space(case, 8)
    assert (finer.mesh.nx, finer.mesh.ny) == (8, 4)
    assert VerificationService.refine_time(case, 0.025).time.dt == 0.025

    disk = CaseConfig.model_validate({"mesh": {"kind": "disk", "boundary": "analytic"}})
    assert VerificationService.refine_space(disk, 3).mesh.levels == 3


async def test_spatial_ladder_of_constant_state():
    case = CaseConfig.model_validate(
        {
            "case": {"name": "flat"},
            "initial": {"kind": "constant"},
            "time": {"t_end": 0.1, "dt": 0.1},
            "solver": {"sp_space": 2, "sp_time": 2},
        }
    )
    rows = await VerificationService.spatial_convergence(case, [4, 8], timings=False)
    assert [row.refine for row in rows] == [0, 1]
    assert [row.param for row in rows] == pytest.approx([0.25, 0.125])
    assert all(row.error_l2 <= 1e-11 for row in rows)
    assert all(row.rate is None and row.wall_ms is None for row in rows)
    # two points on linear elements fall short of the polynomial label
    assert rows[0].label == "V"


async def test_spatial_ladder_recovers_order():
    case = CaseConfig.model_validate(
        {
            "case": {"name": "sine"},
            "time": {"t_end": 0.25, "dt": 0.125},
            "solver": {"sp_space": 3, "sp_time": 7},
        }
    )
    rows = await VerificationService.spatial_convergence(case, [16, 32], threads=2)
    assert rows[1].error_l2 < rows[0].error_l2
    assert rows[1].rate == pytest.approx(3.0, abs=0.4)
    assert rows[1].wall_ms is not None


async def test_ladder_needs_two_rungs():
    with pytest.raises(InvalidArgumentError):
        await VerificationService.temporal_convergence(CaseConfig(), [0.1])


async def test_euler_vortex_spatial_ladder():
    case = CaseConfig.model_validate(
        {
            "case": {"name": "vortex"},
            "law": {"kind": "euler2d", "gamma": 1.4},
            "mesh": {"nx": 10, "ny": 10, "lx": 10.0, "ly": 10.0},
            "initial": {"kind": "vortex"},
            "time": {"t_end": 0.2, "dt": 0.1},
            "solver": {"sp_space": 3, "sp_time": 4, "residual_tol": 1e-9},
        }
    )
    rows = await VerificationService.spatial_convergence(case, [10, 20], threads=2, timings=False)
    assert rows[1].error_l2 < rows[0].error_l2
    assert rows[1].rate == pytest.approx(3.0, abs=0.6)


def one_dimensional_wave(name, sp_space, sp_time, **solver):
    return CaseConfig.model_validate(
        {
            "case": {"name": name},
            "mesh": {"nx": 8, "ny": 1},
            "time": {"t_end": 0.25, "dt": 0.0625},
            "solver": {"sp_space": sp_space, "sp_time": sp_time, "residual_tol": 1e-9, **solver},
        }
    )


async def test_two_time_points_superconverge_at_slab_ends():
    case = one_dimensional_wave("time-sp2", 8, 2)
    rows = await VerificationService.temporal_convergence(case, [0.0625, 0.03125], timings=False, precheck=True)
    assert rows[1].rate == pytest.approx(3.0, abs=0.5)
    assert rows[0].spatial_share is not None and rows[0].spatial_share <= 0.01
    assert rows[1].spatial_share is None


async def test_temporal_rate_on_deforming_square():
    case = CaseConfig.model_validate(
        {
            "case": {"name": "deform-time"},
            "law": {"kind": "advection2d", "velocity": (1.0, 1.0)},
            "mesh": {"nx": 4, "ny": 4},
            "motion": {"kind": "sym_deform"},
            "degrees": {"l": 2, "n": 2},
            "initial": {"wavenumber": (1.0, 1.0)},
            "time": {"t_end": 0.1, "dt": 0.05},
            "solver": {"sp_space": 8, "sp_time": 2, "residual_tol": 1e-9},
        }
    )
    rows = await VerificationService.temporal_convergence(case, [0.05, 0.025], threads=2, timings=False)
    assert rows[1].error_l2 < rows[0].error_l2
    assert rows[1].rate == pytest.approx(3.0, abs=0.5)


async def test_projection_filter_sets_the_rate():
    space_case = one_dimensional_wave("filter-space", 4, 7, filter={"space_points": 3, "theta": 0.0})
    space_case = space_case.model_copy(update={"time": space_case.time.model_copy(update={"dt": 0.125})})
    space_rows = await VerificationService.spatial_convergence(space_case, [8, 16], timings=False)
    assert space_rows[1].rate == pytest.approx(3.0, abs=0.4)

    time_case = one_dimensional_wave("filter-time", 8, 3, filter={"time_points": 2, "theta": 0.0})
    time_rows = await VerificationService.temporal_convergence(time_case, [0.0625, 0.03125], timings=False)
    assert time_rows[1].rate == pytest.approx(1.0, abs=0.4)


def test_freestream_of_euler_on_deforming_grid():
    case = CaseConfig.model_validate(
        {
            "law": {"kind": "euler2d"},
            "initial": {"kind": "constant", "state": [1.2, -0.3, 0.4, 0.8]},
            "mesh": {"nx": 3, "ny": 3},
            "motion": {"kind": "sym_deform"},
            "degrees": {"l": 1, "n": 2},
            "time": {"t_end": 0.1, "dt": 0.05},
        }
    )
    assert VerificationService.freestream_test(case) <= 1e-10


def test_gcl_campaign_rows():
    rows = VerificationService.gcl_campaign(
        MotionLaw(kind="sym_deform"),
        [(1, 1), (2, 1)],
        [(-1, 0), (0, 0), (1, 1)],
        MeshSettings(nx=3, ny=3),
        t_start=0.05,
        dt=0.1,
    )
    assert [(r.l, r.n, r.alpha, r.beta) for r in rows] == [
        (1, 1, 1, 2),
        (1, 1, 2, 2),
        (1, 1, 3, 3),
        (2, 1, 3, 2),
        (2, 1, 4, 2),
        (2, 1, 5, 3),
    ]
    assert all(r.passed for r in rows)
    assert all(r.within_tol for r in rows if r.resolved)
    assert [r.flagged for r in rows] == [True, False, False, True, False, False]


def test_gcl_campaign_skips_negative_degrees():
    rows = VerificationService.gcl_campaign(MotionLaw(), [(1, 1)], [(-3, 0), (0, 0)], t_start=0.0, dt=0.1)
    assert len(rows) == 1 and rows[0].within_tol


def test_table_header_and_formats(tmp_path):
    rows = [
        ConvergenceRow(case="a", refine=0, param=0.5, error_l2=1e-3, label="S", iters=10, residual=1e-12),
        ConvergenceRow(case="a", refine=1, param=0.25, error_l2=1.25e-4, rate=3.0, label="S"),
    ]
    frame = VerificationService.rows_to_frame(rows)
    csv = VerificationService.write_table(frame, tmp_path / "out" / "a.csv")
    assert csv.read_text().splitlines()[0] == ",".join(TABLE_COLUMNS)
    assert TABLE_COLUMNS == ["case", "refine", "param", "error_l2", "rate", "label", "iters", "residual", "wall_ms"]

    tsv = VerificationService.write_table(frame, tmp_path / "a.tsv", fmt="tsv")
    assert tsv.read_text().splitlines()[0].split("\t") == TABLE_COLUMNS

    with pytest.raises(UnsupportedCaseError):
        VerificationService.write_table(frame, tmp_path / "a.json", fmt="json")


def test_table_output_is_reproducible(tmp_path):
    rows = VerificationService.gcl_campaign(MotionLaw(kind="sym_deform"), [(1, 1)], [(0, 0)], t_start=0.05)
    first = VerificationService.write_table(VerificationService.gcl_to_frame(rows), tmp_path / "a.csv")
    again = VerificationService.gcl_campaign(MotionLaw(kind="sym_deform"), [(1, 1)], [(0, 0)], t_start=0.05)
    second = VerificationService.write_table(VerificationService.gcl_to_frame(again), tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
