import json
import logging
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, List, Sequence

import numpy as np
import yaml

from .utils.exceptions import ConfigParse

logger = logging.getLogger(__name__)

TOLERANCE_ENV = "HURWITZ_TOL"


@dataclass(frozen=True)
class Tolerances:
    """
    The single table of numerical tolerances.

    Distances (pole_margin, genericity, collision_margin) are relative to the
    data scale of the covering they are applied to.
    """
    pole_margin: float = 1e-10
    degenerate: float = 1e-8
    genericity: float = 1e-6
    collision_margin: float = 1e-6
    ode_rtol: float = 1e-10
    ode_atol: float = 1e-12
    fd_step: float = 1e-5
    newton_tol: float = 1e-10
    newton_maxiter: int = 50
    quadrature_nodes: int = 512
    quadrature_margin: float = 10.0
    residual: float = 1e-6

    @classmethod
    def from_env(cls, **overrides) -> "Tolerances":
        """Defaults, then HURWITZ_TOL, then explicit overrides."""
        tol = cls()
        raw = os.environ.get(TOLERANCE_ENV)
        if raw:
            try:
                tol = replace(tol, residual=float(raw))
            except ValueError:
                raise ConfigParse(f"{TOLERANCE_ENV}={raw!r} is not a number")
            logger.info("residual tolerance overridden by %s: %g", TOLERANCE_ENV, tol.residual)
        known = {f.name for f in fields(cls)}
        for key in overrides:
            if key not in known:
                raise ValueError(f"Unknown tolerance '{key}'. Available: {sorted(known)}")
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(tol, **overrides)

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_TOLERANCES = Tolerances()


def load_document(path: str) -> Any:
    """
    Reads a JSON (or YAML) document.
    Files ending in .json go through the JSON parser, everything else through
    YAML. Malformed input raises ConfigParse with a path:line:column prefix.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            if path.lower().endswith(".json"):
                return json.load(handle)
            return yaml.safe_load(handle)
    except OSError as e:
        raise ConfigParse(f"{path}: cannot read ({e.strerror})")
    except json.JSONDecodeError as e:
        raise ConfigParse(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        if mark is not None:
            raise ConfigParse(f"{path}:{mark.line + 1}:{mark.column + 1}: {problem}")
        raise ConfigParse(f"{path}: {problem}")


def parse_complex(value: Any, what: str = "value") -> complex:
    """Accepts [re, im], a bare number, or a string such as '1+2j'."""
    try:
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ConfigParse(f"{what}: expected [re, im], got {value!r}")
            return complex(float(value[0]), float(value[1]))
        if isinstance(value, str):
            return complex(value.replace(" ", ""))
        if isinstance(value, bool) or value is None:
            raise ConfigParse(f"{what}: expected a complex number, got {value!r}")
        return complex(value)
    except (TypeError, ValueError):
        raise ConfigParse(f"{what}: cannot read {value!r} as a complex number")


def parse_int(value: Any, what: str = "value") -> int:
    """Accepts integers and integral floats; booleans and strings are rejected."""
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ConfigParse(f"{what}: expected an integer, got {value!r}")
    if not float(value).is_integer():
        raise ConfigParse(f"{what}: expected an integer, got {value!r}")
    return int(value)


def parse_complex_list(values: Any, what: str = "values") -> np.ndarray:
    if not isinstance(values, (list, tuple)):
        raise ConfigParse(f"{what}: expected a list, got {type(values).__name__}")
    return np.array([parse_complex(v, f"{what}[{i}]") for i, v in enumerate(values)], dtype=complex)


def complex_pair(z: complex) -> List[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def complex_pairs(values: Sequence[complex]) -> List[List[float]]:
    return [complex_pair(z) for z in np.ravel(values)]


def require(document: Dict[str, Any], key: str, where: str) -> Any:
    if not isinstance(document, dict):
        raise ConfigParse(f"{where}: expected an object, got {type(document).__name__}")
    if key not in document:
        raise ConfigParse(f"{where}: missing required key '{key}'")
    return document[key]
