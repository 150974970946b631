import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from errors import ConfigurationError, InvalidArgumentError
from models import CaseConfig
from services.geometry_service import GeometryService

logger = logging.getLogger(__name__)

LIST_FIELDS = {"law.velocity", "initial.wavenumber", "initial.state", "initial.center", "initial.mean_flow", "ladder.values"}


class ConfigService:
    """Service for reading and validating dotted key=value case files"""

    @classmethod
    def load_case(cls, path: str | Path) -> CaseConfig:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        values = dotenv_values(path, interpolate=False)
        lines = path.read_text().splitlines()
        return cls.case_from_mapping(values, lines=lines, source=str(path))

    @classmethod
    def case_from_mapping(
        cls, values: Mapping[str, Optional[str]], lines: Optional[List[str]] = None, source: str = "<mapping>"
    ) -> CaseConfig:
        """Build a validated CaseConfig from flat dotted keys"""
        diagnostics: List[str] = []
        nested: Dict[str, Any] = {}
        for key, raw in values.items():
            if raw is None or raw.strip() == "":
                diagnostics.append(f"{cls._where(key, lines)}{key}: missing value")
                continue
            parts = key.strip().split(".")
            if len(parts) < 2 or not all(parts):
                diagnostics.append(f"{cls._where(key, lines)}{key}: keys take the form section.name")
                continue
            node = nested
            for part in parts[:-1]:
                child = node.setdefault(part, {})
                if not isinstance(child, dict):
                    diagnostics.append(f"{cls._where(key, lines)}{key}: conflicts with an earlier value")
                    break
                node = child
            else:
                node[parts[-1]] = cls._coerce(key, raw.strip())
        if diagnostics:
            raise ConfigurationError(f"invalid configuration in {source}", diagnostics)

        try:
            case = CaseConfig.model_validate(nested)
        except ValidationError as exc:
            for error in exc.errors():
                key = ".".join(str(part) for part in error["loc"])
                diagnostics.append(f"{cls._where(key, lines)}{key or '<case>'}: {error['msg']}")
            raise ConfigurationError(f"invalid configuration in {source}", diagnostics) from exc

        cls.validate_case(case)
        return case

    @staticmethod
    def _coerce(key: str, raw: str) -> Any:
        if key in LIST_FIELDS or "," in raw:
            return [item.strip() for item in raw.split(",") if item.strip()]
        return raw

    @staticmethod
    def _where(key: str, lines: Optional[List[str]]) -> str:
        if not lines:
            return ""
        # pydantic locations stop at the deepest model; match the longest key prefix present
        parts = key.split(".")
        while parts:
            pattern = re.compile(rf"^\s*(export\s+)?{re.escape('.'.join(parts))}(\.[\w.]+)?\s*=")
            for number, line in enumerate(lines, start=1):
                if pattern.match(line):
                    return f"line {number}: "
            parts.pop()
        return ""

    @classmethod
    def validate_case(cls, case: CaseConfig) -> None:
        """Check scheme parameters against the classification and basis constraints"""
        try:
            label = GeometryService.classify_scheme(
                case.k, case.m, case.degrees.l, case.degrees.n, case.solver.sp_space, case.solver.sp_time
            )
        except InvalidArgumentError as exc:
            raise ConfigurationError(f"invalid scheme for case {case.case.name}", [str(exc)]) from exc
        if case.time.t_end > 0 and case.time.dt > case.time.t_end and case.ladder.values == []:
            logger.warning("%s: dt=%g exceeds t_end=%g; one shortened slab", case.case.name, case.time.dt, case.time.t_end)
        logger.debug(
            "%s: scheme label %s (space %s, time %s)",
            case.case.name,
            label.label.value,
            label.space.value,
            label.time.value,
        )
