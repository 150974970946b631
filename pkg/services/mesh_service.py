import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import InvalidArgumentError, TopologyError, UnsupportedCaseError
from models import CircularParams, Mesh2D, MeshSettings, MotionLaw, SpaceTimeSlab, SymDeformParams
from services.basis_service import BasisService
from services.geometry_service import GeometryService

logger = logging.getLogger(__name__)

MESH_FORMAT_HEADER = "# stfr-mesh v1"

# corner node indices (a, b) of each face, in the order of its parametrization
FACE_CORNERS = {
    0: ((0, 0), (0, -1)),
    1: ((-1, 0), (-1, -1)),
    2: ((0, 0), (-1, 0)),
    3: ((0, -1), (-1, -1)),
}


class MeshService:
    """Service for building meshes and evaluating grid motion laws"""

    @classmethod
    def build_mesh(cls, settings: MeshSettings, l: int, motion: Optional[MotionLaw] = None) -> Mesh2D:
        if settings.kind == "square":
            return cls.build_square_mesh(
                settings.nx, settings.ny, l, motion, lx=settings.lx, ly=settings.ly, boundary=settings.boundary
            )
        if settings.kind == "disk":
            return cls.build_disk_mesh(settings.levels, l, motion, radius=settings.radius)
        raise UnsupportedCaseError(f"unknown mesh kind {settings.kind!r}")

    @classmethod
    def build_square_mesh(
        cls,
        nx: int,
        ny: int,
        l: int,
        motion: Optional[MotionLaw] = None,
        lx: float = 1.0,
        ly: float = 1.0,
        boundary: str = "periodic",
    ) -> Mesh2D:
        """Uniform nx x ny mesh of [0, lx] x [0, ly]; element e = j * nx + i"""
        if nx < 1 or ny < 1:
            raise InvalidArgumentError(f"square mesh needs nx, ny >= 1, got {nx}, {ny}")
        if l < 1:
            raise InvalidArgumentError(f"geometry degree l must be >= 1, got {l}")
        if boundary not in ("periodic", "analytic"):
            raise InvalidArgumentError(f"unknown boundary mode {boundary!r}")

        s = 0.5 * (BasisService.gauss_lobatto(l + 1).points + 1.0)
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        ii, jj = ii.ravel(), jj.ravel()
        x = lx * (ii[:, None] + s[None, :]) / nx
        y = ly * (jj[:, None] + s[None, :]) / ny
        ref = np.empty((nx * ny, l + 1, l + 1, 2))
        ref[..., 0] = x[:, :, None]
        ref[..., 1] = y[:, None, :]

        E = nx * ny
        neighbors = np.empty((E, 4), dtype=int)
        neighbor_faces = np.tile(np.array([1, 0, 3, 2]), (E, 1))
        neighbors[:, 0] = jj * nx + (ii - 1) % nx
        neighbors[:, 1] = jj * nx + (ii + 1) % nx
        neighbors[:, 2] = ((jj - 1) % ny) * nx + ii
        neighbors[:, 3] = ((jj + 1) % ny) * nx + ii
        on_edge = np.zeros((E, 4), dtype=bool)
        if boundary == "analytic":
            on_edge[:, 0] = ii == 0
            on_edge[:, 1] = ii == nx - 1
            on_edge[:, 2] = jj == 0
            on_edge[:, 3] = jj == ny - 1
            own = np.arange(E)[:, None].repeat(4, axis=1)
            neighbors = np.where(on_edge, own, neighbors)
            neighbor_faces = np.where(on_edge, np.arange(4)[None, :], neighbor_faces)

        return Mesh2D(
            kind="square",
            l=l,
            nx=nx,
            ny=ny,
            lx=lx,
            ly=ly,
            ref_xy=ref,
            neighbors=neighbors,
            neighbor_faces=neighbor_faces,
            reversed=np.zeros((E, 4), dtype=bool),
            boundary=on_edge,
            motion=motion or MotionLaw(),
        )

    @classmethod
    def build_disk_mesh(
        cls, levels: int, l: int, motion: Optional[MotionLaw] = None, radius: float = 0.5
    ) -> Mesh2D:
        """Five-block butterfly mesh of the disk; 2^levels elements per block direction"""
        if levels < 1:
            raise InvalidArgumentError(f"disk mesh needs levels >= 1, got {levels}")
        if l < 1:
            raise InvalidArgumentError(f"geometry degree l must be >= 1, got {l}")

        N = 2**levels
        half = 0.5 * radius
        s = 0.5 * (BasisService.gauss_lobatto(l + 1).points + 1.0)
        local = (np.arange(N)[:, None] + s[None, :]) / N  # (N, l+1) in [0, 1]

        blocks: List[np.ndarray] = []
        # centre square
        xc = -half + 2.0 * half * local
        centre = np.empty((N, N, l + 1, l + 1, 2))
        centre[..., 0] = xc[:, None, :, None]
        centre[..., 1] = xc[None, :, None, :]
        blocks.append(centre.transpose(1, 0, 2, 3, 4).reshape(N * N, l + 1, l + 1, 2))

        u = local[:, None, :, None]
        v = (-1.0 + 2.0 * local)[None, :, None, :]
        arc = 0.25 * np.pi * v
        px = (1.0 - u) * half + u * radius * np.cos(arc)
        py = (1.0 - u) * half * v + u * radius * np.sin(arc)
        for k in range(4):
            c, sn = math.cos(0.5 * np.pi * k), math.sin(0.5 * np.pi * k)
            block = np.empty((N, N, l + 1, l + 1, 2))
            block[..., 0] = c * px - sn * py
            block[..., 1] = sn * px + c * py
            blocks.append(block.transpose(1, 0, 2, 3, 4).reshape(N * N, l + 1, l + 1, 2))

        ref = np.concatenate(blocks, axis=0)
        # snap the boundary arc onto the circle
        r = np.hypot(ref[..., 0], ref[..., 1])
        on_circle = np.abs(r - radius) < 1e-12
        ref[on_circle] *= (radius / r[on_circle])[:, None]

        neighbors, neighbor_faces, rev, boundary = cls.match_faces(ref)
        logger.debug("disk mesh: levels=%d, %d elements, %d boundary faces", levels, len(ref), int(boundary.sum()))
        return Mesh2D(
            kind="disk",
            l=l,
            levels=levels,
            radius=radius,
            ref_xy=ref,
            neighbors=neighbors,
            neighbor_faces=neighbor_faces,
            reversed=rev,
            boundary=boundary,
            motion=motion or MotionLaw(),
        )

    @staticmethod
    def _corner_key(point: np.ndarray) -> Tuple[int, int]:
        return int(round(point[0] * 1e9)), int(round(point[1] * 1e9))

    @classmethod
    def match_faces(cls, ref: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Pair element faces that share both corner nodes"""
        E = ref.shape[0]
        owners: Dict[Tuple, List[Tuple[int, int, Tuple[int, int]]]] = {}
        for e in range(E):
            for f, (c0, c1) in FACE_CORNERS.items():
                k0, k1 = cls._corner_key(ref[e][c0]), cls._corner_key(ref[e][c1])
                owners.setdefault(tuple(sorted((k0, k1))), []).append((e, f, k0))

        neighbors = np.repeat(np.arange(E)[:, None], 4, axis=1)
        neighbor_faces = np.repeat(np.arange(4)[None, :], E, axis=0)
        rev = np.zeros((E, 4), dtype=bool)
        boundary = np.zeros((E, 4), dtype=bool)
        for key, sides in owners.items():
            if len(sides) == 1:
                e, f, _ = sides[0]
                boundary[e, f] = True
            elif len(sides) == 2:
                (ea, fa, ka), (eb, fb, kb) = sides
                neighbors[ea, fa], neighbor_faces[ea, fa] = eb, fb
                neighbors[eb, fb], neighbor_faces[eb, fb] = ea, fa
                rev[ea, fa] = rev[eb, fb] = ka != kb
            else:
                raise TopologyError(f"face with corners {key} is shared by {len(sides)} elements")
        cls._check_conforming(ref, neighbors, neighbor_faces, rev, boundary)
        return neighbors, neighbor_faces, rev, boundary

    @staticmethod
    def face_nodes(element_nodes: np.ndarray, face: int) -> np.ndarray:
        """Geometry nodes along a face in parametrization order"""
        return {
            0: element_nodes[0, :],
            1: element_nodes[-1, :],
            2: element_nodes[:, 0],
            3: element_nodes[:, -1],
        }[face]

    @classmethod
    def _check_conforming(
        cls, ref: np.ndarray, neighbors: np.ndarray, faces: np.ndarray, rev: np.ndarray, boundary: np.ndarray
    ) -> None:
        for e in range(ref.shape[0]):
            for f in range(4):
                if boundary[e, f]:
                    continue
                mine = cls.face_nodes(ref[e], f)
                theirs = cls.face_nodes(ref[neighbors[e, f]], faces[e, f])
                if rev[e, f]:
                    theirs = theirs[::-1]
                if np.max(np.abs(mine - theirs)) > 1e-10:
                    raise TopologyError(f"face {f} of element {e} is not conforming with element {neighbors[e, f]}")

    # ------------------------------------------------------------ motion

    @staticmethod
    def sym_deform_position(
        x0: np.ndarray, y0: np.ndarray, t: float, params: SymDeformParams = SymDeformParams()
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Closed-form positions of the symmetric deforming square"""
        wx = params.n_x * np.pi / params.length_x
        wy = params.n_y * np.pi / params.length_y
        wt = params.n_t * np.pi / params.t_max
        shape = np.sin(wx * np.asarray(x0)) * np.sin(wy * np.asarray(y0))
        ramp = (1.0 - np.cos(wt * t)) / (wt * params.t_max)
        return (
            x0 + params.amp_x * params.length_x * shape * ramp,
            y0 + params.amp_y * params.length_y * shape * ramp,
        )

    @staticmethod
    def sym_deform_velocity(
        x0: np.ndarray, y0: np.ndarray, t: float, params: SymDeformParams = SymDeformParams()
    ) -> Tuple[np.ndarray, np.ndarray]:
        wx = params.n_x * np.pi / params.length_x
        wy = params.n_y * np.pi / params.length_y
        wt = params.n_t * np.pi / params.t_max
        shape = np.sin(wx * np.asarray(x0)) * np.sin(wy * np.asarray(y0))
        rate = np.sin(wt * t) / params.t_max
        return params.amp_x * params.length_x * shape * rate, params.amp_y * params.length_y * shape * rate

    @staticmethod
    def circular_position(
        r0: np.ndarray, theta0: np.ndarray, t: float, params: CircularParams = CircularParams()
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Translating, rotating, stretching and swirling disk"""

        def wobble(lam: np.ndarray | float, omega: float, tau: float) -> np.ndarray:
            return np.sin(omega * lam + tau * (1.0 - np.cos(omega * lam)))

        r0 = np.asarray(r0, dtype=float)
        alpha = t**3 * (8.0 - 3.0 * t) / 16.0
        psi = 1.0 + (params.amp_aspect - 1.0) * alpha
        r4 = r0**4
        swirl = (
            t**6
            / (t**6 + 0.01)
            * (16.0 * r4 + wobble(t, 10.0, 0.7) * (np.cos(32.0 * np.pi * r4) - 1.0))
            * wobble(theta0, 1.0, 0.7)
        )
        theta = theta0 + params.amp_g * swirl
        a = psi * r0 * np.cos(theta)
        b = r0 * np.sin(theta) / psi
        phi = params.amp_theta * alpha
        x = math.cos(phi) * a - math.sin(phi) * b
        y = math.sin(phi) * a + math.cos(phi) * b + alpha
        return x, y

    @classmethod
    def move(cls, motion: MotionLaw, ref_xy: np.ndarray, t: float) -> np.ndarray:
        """Physical positions at time t of points given by reference coordinates (..., 2)"""
        x0, y0 = ref_xy[..., 0], ref_xy[..., 1]
        if motion.kind == "stationary":
            return np.array(ref_xy, dtype=float, copy=True)
        if motion.kind == "sym_deform":
            x, y = cls.sym_deform_position(x0, y0, t, motion.sym_deform)
        elif motion.kind == "circular":
            x, y = cls.circular_position(np.hypot(x0, y0), np.arctan2(y0, x0), t, motion.circular)
        else:
            raise UnsupportedCaseError(f"unknown motion {motion.kind!r}")
        return np.stack([x, y], axis=-1)

    @classmethod
    def build_slab(
        cls,
        mesh: Mesh2D,
        motion: Optional[MotionLaw],
        t_start: float,
        dt: float,
        n: int,
        index: int = 0,
        check: bool = True,
    ) -> SpaceTimeSlab:
        """Space-time elements of one slab with GLL time levels"""
        if dt <= 0.0:
            raise InvalidArgumentError(f"slab length must be positive, got {dt}")
        if n < 1:
            raise InvalidArgumentError(f"temporal geometry degree n must be >= 1, got {n}")
        motion = motion or mesh.motion
        t_nodes = t_start + 0.5 * dt * (BasisService.gauss_lobatto(n + 1).points + 1.0)
        xy = np.stack([cls.move(motion, mesh.ref_xy, float(t)) for t in t_nodes], axis=3)
        slab = SpaceTimeSlab(index=index, t_start=t_start, dt=dt, l=mesh.l, n=n, xy_nodes=xy, t_nodes=t_nodes)
        if check:
            GeometryService.check_slab(slab)
        return slab

    @classmethod
    def trajectory(
        cls,
        motion: MotionLaw,
        ref_point: Tuple[float, float],
        dt: float,
        n: int,
        t_end: float,
        samples: int = 16,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Path of one point as represented by degree-n slab geometry, sampled per slab"""
        if dt <= 0.0 or t_end <= 0.0:
            raise InvalidArgumentError("trajectory needs positive dt and t_end")
        ref = np.asarray(ref_point, dtype=float).reshape(1, 2)
        gll = BasisService.gauss_lobatto(n + 1).points
        basis = BasisService.lagrange_basis(gll)
        tau = np.linspace(-1.0, 1.0, samples)
        weights = basis.evaluate(tau)

        ts: List[np.ndarray] = []
        xys: List[np.ndarray] = []
        t0 = 0.0
        while t0 < t_end - 1e-12:
            h = min(dt, t_end - t0)
            levels = t0 + 0.5 * h * (gll + 1.0)
            nodes = np.stack([cls.move(motion, ref, float(t))[0] for t in levels])
            ts.append(t0 + 0.5 * h * (tau + 1.0))
            xys.append(weights @ nodes)
            t0 += h
        t = np.concatenate(ts)
        xy = np.concatenate(xys)
        return t, xy[:, 0], xy[:, 1]

    # ------------------------------------------------------------ text format

    @classmethod
    def write_mesh(cls, mesh: Mesh2D, path: str | Path) -> None:
        lines = [
            MESH_FORMAT_HEADER,
            f"kind {mesh.kind}",
            f"l {mesh.l}",
            f"nx {mesh.nx} ny {mesh.ny} levels {mesh.levels}",
            f"lx {mesh.lx!r} ly {mesh.ly!r} radius {mesh.radius!r}",
            f"elements {mesh.n_elements}",
            "nodes",
        ]
        for e in range(mesh.n_elements):
            for a in range(mesh.l + 1):
                for b in range(mesh.l + 1):
                    x, y = mesh.ref_xy[e, a, b]
                    lines.append(f"{e} {a} {b} {x!r} {y!r}")
        lines.append("faces")
        for e in range(mesh.n_elements):
            for f in range(4):
                lines.append(
                    f"{e} {f} {mesh.neighbors[e, f]} {mesh.neighbor_faces[e, f]} "
                    f"{int(mesh.reversed[e, f])} {'analytic' if mesh.boundary[e, f] else 'interior'}"
                )
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read_mesh(cls, path: str | Path, motion: Optional[MotionLaw] = None) -> Mesh2D:
        text = Path(path).read_text().splitlines()
        if not text or text[0].strip() != MESH_FORMAT_HEADER:
            raise TopologyError(f"{path}: missing header {MESH_FORMAT_HEADER!r}")
        try:
            header: Dict[str, str] = {}
            idx = 1
            while text[idx].strip() != "nodes":
                tokens = text[idx].split()
                header.update(zip(tokens[0::2], tokens[1::2]))
                idx += 1
            l = int(header["l"])
            E = int(header["elements"])
            ref = np.empty((E, l + 1, l + 1, 2))
            idx += 1
            for _ in range(E * (l + 1) ** 2):
                e, a, b, x, y = text[idx].split()
                ref[int(e), int(a), int(b)] = (float(x), float(y))
                idx += 1
            if text[idx].strip() != "faces":
                raise TopologyError(f"{path}: expected 'faces' at line {idx + 1}")
            idx += 1
            neighbors = np.empty((E, 4), dtype=int)
            neighbor_faces = np.empty((E, 4), dtype=int)
            rev = np.zeros((E, 4), dtype=bool)
            boundary = np.zeros((E, 4), dtype=bool)
            for _ in range(4 * E):
                e, f, ne, nf, r, tag = text[idx].split()
                e, f = int(e), int(f)
                neighbors[e, f], neighbor_faces[e, f], rev[e, f] = int(ne), int(nf), bool(int(r))
                boundary[e, f] = tag == "analytic"
                idx += 1
        except (KeyError, IndexError, ValueError) as exc:
            raise TopologyError(f"{path}: malformed mesh file: {exc}") from exc

        if header["kind"] == "disk":
            # periodic partners of the square do not share coordinates
            cls._check_conforming(ref, neighbors, neighbor_faces, rev, boundary)
        return Mesh2D(
            kind=header["kind"],  # type: ignore[arg-type]
            l=l,
            nx=int(header.get("nx", 0)),
            ny=int(header.get("ny", 0)),
            levels=int(header.get("levels", 0)),
            lx=float(header.get("lx", 1.0)),
            ly=float(header.get("ly", 1.0)),
            radius=float(header.get("radius", 0.5)),
            ref_xy=ref,
            neighbors=neighbors,
            neighbor_faces=neighbor_faces,
            reversed=rev,
            boundary=boundary,
            motion=motion or MotionLaw(),
        )
