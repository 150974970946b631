import math
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ArrayModel(BaseModel):
    """Frozen model that may hold numpy arrays"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ---------------------------------------------------------------- basis


class Quadrature1D(ArrayModel):
    points: np.ndarray
    weights: np.ndarray

    @property
    def npts(self) -> int:
        return int(self.points.shape[0])


class LagrangeBasis1D(ArrayModel):
    """Nodal Lagrange basis in barycentric form.

    ``diff_matrix[a, b]`` is the derivative of the b-th cardinal function at node a,
    ``boundary_rows[0]`` and ``boundary_rows[1]`` its values at -1 and +1.
    """

    nodes: np.ndarray
    bary_weights: np.ndarray
    diff_matrix: np.ndarray
    boundary_rows: np.ndarray

    @property
    def npts(self) -> int:
        return int(self.nodes.shape[0])

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """Cardinal functions at ``xi``, shape (len(xi), npts)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        diff = xi[:, None] - self.nodes[None, :]
        exact = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = self.bary_weights[None, :] / diff
            values = terms / terms.sum(axis=1, keepdims=True)
        hit = exact.any(axis=1)
        values[hit] = exact[hit].astype(float)
        return values

    def derivative(self, xi: np.ndarray) -> np.ndarray:
        """Derivatives of the cardinal functions at ``xi``, shape (len(xi), npts)."""
        return self.evaluate(xi) @ self.diff_matrix


class CorrectionFunctions(ArrayModel):
    """Right Radau correction pair g_L, g_R sampled at a node set"""

    degree: int
    nodes: np.ndarray
    left_deriv: np.ndarray
    right_deriv: np.ndarray
    left_ends: Tuple[float, float]
    right_ends: Tuple[float, float]


class ProjectionPair(ArrayModel):
    """High/low Gauss-Legendre node sets for the L2 projection filter.

    ``proj_*`` map high nodal values to low nodal values, ``lift_*`` evaluate
    low polynomials at the high nodes. An unfiltered dimension has identical
    high and low sets.
    """

    high_space: Quadrature1D
    high_time: Quadrature1D
    low_space: Quadrature1D
    low_time: Quadrature1D
    theta: float
    filter_space: bool = True
    filter_time: bool = True
    proj_space: np.ndarray
    proj_time: np.ndarray
    lift_space: np.ndarray
    lift_time: np.ndarray


# ---------------------------------------------------------------- geometry


class SpaceTimeElement(ArrayModel):
    """Single space-time element: GLL geometry nodes (l+1, l+1, n+1, 2) and time levels (n+1)."""

    l: int = Field(ge=1)
    n: int = Field(ge=1)
    xy_nodes: np.ndarray
    t_nodes: np.ndarray
    index: int = 0

    @model_validator(mode="after")
    def _check_shapes(self) -> "SpaceTimeElement":
        expected = (self.l + 1, self.l + 1, self.n + 1, 2)
        if self.xy_nodes.shape != expected:
            raise ValueError(f"xy_nodes shape {self.xy_nodes.shape} != {expected}")
        if self.t_nodes.shape != (self.n + 1,):
            raise ValueError(f"t_nodes shape {self.t_nodes.shape} != {(self.n + 1,)}")
        return self


class MetricEntries(ArrayModel):
    """|J| and the |J|-scaled inverse-Jacobian entries at a set of points"""

    det: np.ndarray
    tau_t: np.ndarray
    xi_t: np.ndarray
    eta_t: np.ndarray
    xi_x: np.ndarray
    xi_y: np.ndarray
    eta_x: np.ndarray
    eta_y: np.ndarray


class FaceMetrics(ArrayModel):
    """Metric data on one of the six faces of every element in a slab.

    ``row_*`` is the |J|-scaled gradient of the face coordinate, ``scaling`` the
    signed face flux scaling. Spatial faces also carry the outward unit normal,
    the normal grid speed and the spatial share of the space-time normal.
    """

    name: str
    sign: float
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    det: np.ndarray
    row_t: np.ndarray
    row_x: np.ndarray
    row_y: np.ndarray
    scaling: np.ndarray
    normal_x: Optional[np.ndarray] = None
    normal_y: Optional[np.ndarray] = None
    normal_speed: Optional[np.ndarray] = None
    spatial_fraction: Optional[np.ndarray] = None


class MetricCache(ArrayModel):
    solution: MetricEntries
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    faces: Dict[str, FaceMetrics]


class SchemeLabel(str, Enum):
    S = "S"
    P = "P"
    V = "V"

    @property
    def rank(self) -> int:
        return {"V": 0, "P": 1, "S": 2}[self.value]


class SchemeClassification(BaseModel):
    model_config = ConfigDict(frozen=True)

    space: SchemeLabel
    time: SchemeLabel

    @property
    def label(self) -> SchemeLabel:
        return self.space if self.space.rank <= self.time.rank else self.time


class MetricDegrees(BaseModel):
    """Polynomial degrees (xi, eta, tau) of |J| and of each metric row"""

    det: Tuple[int, int, int]
    tau_t: Tuple[int, int, int]
    xi_t: Tuple[int, int, int]
    eta_t: Tuple[int, int, int]
    xi_xy: Tuple[int, int, int]
    eta_xy: Tuple[int, int, int]


class FluxDegrees(BaseModel):
    """Degrees of the reference fluxes of the hidden working variable and matching correction degrees"""

    working_space: int
    working_time: int
    flux_space: int
    flux_time: int
    correction_space: int
    correction_time: int


# ---------------------------------------------------------------- mesh and motion


class SymDeformParams(BaseModel):
    amp_x: float = 0.1
    amp_y: float = 0.1
    length_x: float = 1.0
    length_y: float = 1.0
    n_x: float = 4.0
    n_y: float = 4.0
    n_t: float = 0.5
    t_max: float = Field(default=0.2, gt=0.0)


class CircularParams(BaseModel):
    amp_theta: float = math.pi
    amp_aspect: float = 1.5
    amp_g: float = 0.15


class MotionLaw(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["stationary", "sym_deform", "circular"] = "stationary"
    sym_deform: SymDeformParams = SymDeformParams()
    circular: CircularParams = CircularParams()


class Mesh2D(ArrayModel):
    """Quadrilateral mesh with per-element reference node positions.

    Faces are numbered 0: xi-, 1: xi+, 2: eta-, 3: eta+. For every face,
    ``neighbors``/``neighbor_faces`` give the partner, ``reversed`` flags an
    opposite parametrization and ``boundary`` marks analytic faces.
    """

    kind: Literal["square", "disk"]
    l: int
    nx: int = 0
    ny: int = 0
    levels: int = 0
    lx: float = 1.0
    ly: float = 1.0
    radius: float = 0.5
    ref_xy: np.ndarray
    neighbors: np.ndarray
    neighbor_faces: np.ndarray
    reversed: np.ndarray
    boundary: np.ndarray
    motion: MotionLaw = MotionLaw()

    @property
    def n_elements(self) -> int:
        return int(self.ref_xy.shape[0])

    @property
    def size(self) -> float:
        """Characteristic element size used as the refinement parameter."""
        if self.kind == "square":
            return self.lx / self.nx
        return self.radius / 2**self.levels


class SpaceTimeSlab(ArrayModel):
    """All elements of one time slab, geometry nodes (E, l+1, l+1, n+1, 2)."""

    index: int
    t_start: float
    dt: float
    l: int
    n: int
    xy_nodes: np.ndarray
    t_nodes: np.ndarray

    def __len__(self) -> int:
        return int(self.xy_nodes.shape[0])

    def element(self, e: int) -> SpaceTimeElement:
        return SpaceTimeElement(l=self.l, n=self.n, xy_nodes=self.xy_nodes[e], t_nodes=self.t_nodes, index=e)


# ---------------------------------------------------------------- physics and solver


class ConservationLaw(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["advection1d", "advection2d", "euler2d"] = "advection1d"
    velocity: Tuple[float, float] = (1.0, 0.0)
    gamma: float = Field(default=1.4, gt=1.0)

    @property
    def n_vars(self) -> int:
        return 4 if self.kind == "euler2d" else 1

    @model_validator(mode="after")
    def _one_dimensional(self) -> "ConservationLaw":
        if self.kind == "advection1d" and self.velocity[1] != 0.0:
            raise ValueError("advection1d requires velocity with zero y component")
        return self


class NodalField(ArrayModel):
    """Space-time solution values (E, ns, ns, nt, Nv) of one slab"""

    values: np.ndarray
    t_start: float = 0.0
    dt: float = 0.0


class SolveReport(BaseModel):
    slab: int = 0
    iterations: int
    initial_residual: float
    residual_abs: float
    final_residual: float
    converged: bool
    diverged: bool = False
    wall_ms: float = 0.0


class FilterSettings(BaseModel):
    """Target point counts of the projection filter; None leaves a dimension untouched"""

    model_config = ConfigDict(extra="forbid")

    space_points: Optional[int] = Field(default=None, ge=1)
    time_points: Optional[int] = Field(default=None, ge=1)
    theta: float = Field(default=1.0, ge=0.0, le=1.0)

    @property
    def active(self) -> bool:
        return self.space_points is not None or self.time_points is not None


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sp_space: int = Field(default=3, ge=1)
    sp_time: int = Field(default=3, ge=1)
    cfl: float = Field(default=0.5, gt=0.0)
    residual_tol: float = Field(default=1e-11, gt=0.0)
    residual_floor: float = Field(default=1e-14, ge=0.0)
    max_iters: int = Field(default=20000, ge=1)
    correction_space: Optional[int] = Field(default=None, ge=1)
    correction_time: Optional[int] = Field(default=None, ge=1)
    residual_form: Literal["hybrid", "conservative"] = "hybrid"
    filter: FilterSettings = FilterSettings()

    @model_validator(mode="after")
    def _filter_targets(self) -> "SolverConfig":
        if self.filter.space_points is not None and self.filter.space_points >= self.sp_space:
            raise ValueError(f"filter.space_points={self.filter.space_points} must be below sp_space={self.sp_space}")
        if self.filter.time_points is not None and self.filter.time_points >= self.sp_time:
            raise ValueError(f"filter.time_points={self.filter.time_points} must be below sp_time={self.sp_time}")
        return self


# ---------------------------------------------------------------- case configuration


class FormatSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int = 1

    @field_validator("version")
    @classmethod
    def _supported(cls, value: int) -> int:
        if value != 1:
            raise ValueError(f"unsupported format version {value}; this build reads version 1")
        return value


class CaseSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "case"


class MeshSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["square", "disk"] = "square"
    nx: int = Field(default=8, ge=1)
    ny: int = Field(default=1, ge=1)
    levels: int = Field(default=1, ge=1)
    lx: float = Field(default=1.0, gt=0.0)
    ly: float = Field(default=1.0, gt=0.0)
    radius: float = Field(default=0.5, gt=0.0)
    boundary: Literal["periodic", "analytic"] = "periodic"


class DegreeSettings(BaseModel):
    """Nominal degrees: k, m of the solution, l, n of the geometry"""

    model_config = ConfigDict(extra="forbid")

    k: Optional[int] = Field(default=None, ge=0)
    m: Optional[int] = Field(default=None, ge=0)
    l: int = Field(default=1, ge=1)
    n: int = Field(default=1, ge=1)


class TimeSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_end: float = Field(default=1.0, ge=0.0)
    dt: float = Field(default=0.1, gt=0.0)


class InitialSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["wave", "constant", "vortex"] = "wave"
    wavenumber: Tuple[float, float] = (1.0, 0.0)
    amplitude: float = 1.0
    offset: float = 0.0
    state: Optional[List[float]] = None
    strength: float = 5.0 / (2.0 * math.pi)
    center: Tuple[float, float] = (5.0, 5.0)
    mean_flow: Tuple[float, float] = (1.0, 1.0)


class LadderSettings(BaseModel):
    """Refinement ladder: element counts (square), levels (disk) or time steps"""

    model_config = ConfigDict(extra="forbid")

    values: List[float] = Field(default_factory=list)


class CaseConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: FormatSettings = FormatSettings()
    case: CaseSettings = CaseSettings()
    law: ConservationLaw = ConservationLaw()
    mesh: MeshSettings = MeshSettings()
    motion: MotionLaw = MotionLaw()
    degrees: DegreeSettings = DegreeSettings()
    time: TimeSettings = TimeSettings()
    initial: InitialSettings = InitialSettings()
    solver: SolverConfig = SolverConfig()
    ladder: LadderSettings = LadderSettings()

    @property
    def k(self) -> int:
        return self.degrees.k if self.degrees.k is not None else self.solver.sp_space - 1

    @property
    def m(self) -> int:
        return self.degrees.m if self.degrees.m is not None else self.solver.sp_time - 1

    @model_validator(mode="after")
    def _consistent(self) -> "CaseConfig":
        if self.law.kind == "euler2d" and self.initial.kind == "wave":
            raise ValueError("euler2d supports initial.kind 'vortex' or 'constant'")
        if self.law.kind != "euler2d" and self.initial.kind == "vortex":
            raise ValueError("initial.kind 'vortex' requires law.kind 'euler2d'")
        if self.motion.kind == "circular" and self.mesh.kind != "disk":
            raise ValueError("circular motion is defined on the disk mesh")
        if self.mesh.boundary == "periodic" and self.mesh.kind == "disk":
            raise ValueError("the disk mesh uses analytic boundaries")
        return self


# ---------------------------------------------------------------- results


class AdvanceResult(ArrayModel):
    field: NodalField
    top_trace: np.ndarray
    trace_times: List[float]
    integrals: List[np.ndarray]
    reports: List[SolveReport]
    slab: Optional[SpaceTimeSlab] = None
    mesh: Mesh2D
    trace_tau: float = 1.0

    @property
    def iterations(self) -> int:
        return sum(r.iterations for r in self.reports)

    @property
    def final_residual(self) -> float:
        return max((r.final_residual for r in self.reports), default=0.0)


class ConvergenceRow(BaseModel):
    case: str
    refine: int
    param: float
    error_l2: float
    rate: Optional[float] = None
    label: str
    iters: int = 0
    residual: float = 0.0
    wall_ms: Optional[float] = None
    # |error(sp_space) - error(sp_space + 2)| / error at the coarsest rung, when measured
    spatial_share: Optional[float] = None


class GCLRow(BaseModel):
    l: int
    n: int
    alpha: int
    beta: int
    res_time: float
    res_x: float
    res_y: float
    resolved: bool
    within_tol: bool

    @property
    def flagged(self) -> bool:
        """Under-resolved sampling: the identities are not expected to hold."""
        return not self.resolved

    @property
    def passed(self) -> bool:
        return self.within_tol or not self.resolved


class ReproOutcome(BaseModel):
    figure: str
    passed: bool
    qualitative: bool = False
    messages: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)


# ---------------------------------------------------------------- command line


class CommandDescription(BaseModel):
    description: str
    use_when: str
    side_effects: str | None = None

    def render(self) -> str:
        parts = [self.description, f"Use when: {self.use_when}"]
        if self.side_effects:
            parts.append(f"Side effects: {self.side_effects}")
        return "\n\n".join(parts)
