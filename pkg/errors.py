"""Exception hierarchy and process exit codes."""

from typing import Optional, Sequence

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3


class STFRError(Exception):
    """Base class for every error raised by the solver and its harness"""

    exit_code: int = EXIT_USAGE


class InvalidArgumentError(STFRError, ValueError):
    """A caller passed a value outside the documented domain"""


class DegenerateElementError(STFRError):
    """A space-time element has a non-positive Jacobian determinant"""

    def __init__(self, element: int, ref_point: Sequence[float], det: float) -> None:
        self.element = element
        self.ref_point = tuple(float(v) for v in ref_point)
        self.det = det
        super().__init__(f"element {element} is degenerate at (tau, xi, eta)={self.ref_point}: |J|={det:.3e}")


class InadmissibleStateError(STFRError, ValueError):
    """Non-positive density or pressure met while evaluating a flux"""

    def __init__(self, message: str, index: Optional[tuple] = None) -> None:
        self.index = index
        super().__init__(message if index is None else f"{message} at index {index}")


class DivergenceError(STFRError, ArithmeticError):
    """Pseudo-time iteration produced NaN or Inf"""

    exit_code = EXIT_DIVERGENCE

    def __init__(self, iteration: int, slab: Optional[int] = None) -> None:
        self.iteration = iteration
        self.slab = slab
        where = f" in slab {slab}" if slab is not None else ""
        super().__init__(f"pseudo-time iteration diverged at iteration {iteration}{where}")


class ConfigurationError(STFRError, ValueError):
    """A case file or set of options failed validation"""

    def __init__(self, message: str, diagnostics: Sequence[str] = ()) -> None:
        self.diagnostics = list(diagnostics)
        detail = "\n".join(f"  {line}" for line in self.diagnostics)
        super().__init__(f"{message}\n{detail}" if detail else message)


class TopologyError(STFRError):
    """Mesh connectivity is inconsistent"""


class UnsupportedCaseError(STFRError):
    """The requested case, mesh, motion or figure is not known"""

