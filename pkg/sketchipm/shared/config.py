"""
Solver configuration

IpmConfig holds every tunable of the outer loop, the sketch and the inner
solver. Values may also come from an optional key=value file (one setting per
line, '#' comments), which the CLI layers under its own flags.
"""

import logging
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Union

from dotenv import dotenv_values

from .errors import InvalidParameter
from .models.core import InnerMaxPolicy, InnerSolverKind, SketchKind

logger = logging.getLogger(__name__)


@dataclass
class IpmConfig:
    """Configuration for the sketched infeasible IPM"""
    gamma: float = 0.9             # neighborhood: x_i s_i >= (1 - gamma) mu
    sigma: float = 0.5             # centering, must stay below 4/5
    epsilon: float = 1e-9          # stop once mu <= epsilon
    relative_epsilon: bool = False # stop once mu <= epsilon * mu0 instead
    zeta: float = 0.5              # target embedding distortion, drives sketch width
    delta: Optional[float] = None  # failure probability knob for the sketch width
    tol_cg: float = 1e-5           # relative inner residual tolerance

    solver: InnerSolverKind = InnerSolverKind.PCG
    inner_max_policy: InnerMaxPolicy = InnerMaxPolicy.THEORETICAL
    inner_max_iters: int = 200                  # used by InnerMaxPolicy.FIXED
    max_inner_unpreconditioned: int = 10000     # cap for the plain CG baseline

    sketch_kind: SketchKind = SketchKind.SPARSE
    sketch_w: Optional[int] = None  # None: sized from m, zeta, delta
    sketch_s: Optional[int] = None  # None: min(8, w)

    max_outer: int = 500
    seed: int = 0
    y0: str = "zeros"               # "zeros" or "ones"
    residual_floor: float = 1e-12   # absolute slack on residual-ratio tests, times max(1, ||b||, ||c||)

    track_condition_numbers: bool = True
    kappa_max_rows: int = 2000      # skip dense eigensolves above this m

    def __post_init__(self):
        for name, enum_type in (
            ("solver", InnerSolverKind),
            ("inner_max_policy", InnerMaxPolicy),
            ("sketch_kind", SketchKind),
        ):
            value = getattr(self, name)
            if not isinstance(value, enum_type):
                try:
                    setattr(self, name, enum_type(value))
                except ValueError:
                    choices = ", ".join(member.value for member in enum_type)
                    raise InvalidParameter(f"{name} must be one of {choices}, got {value!r}") from None
        self.validate()

    def validate(self):
        """Raise InvalidParameter for any value outside its admissible range"""
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParameter(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.sigma < 0.8:
            raise InvalidParameter(f"sigma must lie in (0, 4/5), got {self.sigma}")
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise InvalidParameter(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.zeta < 0.999:
            raise InvalidParameter(f"zeta must lie in (0, 0.999), got {self.zeta}")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise InvalidParameter(f"delta must lie in (0, 1), got {self.delta}")
        if not self.tol_cg > 0.0:
            raise InvalidParameter(f"tol_cg must be positive, got {self.tol_cg}")
        if self.inner_max_iters < 1 or self.max_inner_unpreconditioned < 1:
            raise InvalidParameter("inner iteration caps must be >= 1")
        if self.sketch_w is not None and self.sketch_w < 1:
            raise InvalidParameter(f"sketch width w must be >= 1, got {self.sketch_w}")
        if self.sketch_s is not None and self.sketch_s < 1:
            raise InvalidParameter(f"nonzeros per row s must be >= 1, got {self.sketch_s}")
        if self.max_outer < 1:
            raise InvalidParameter(f"max_outer must be >= 1, got {self.max_outer}")
        if self.y0 not in ("zeros", "ones"):
            raise InvalidParameter(f"y0 must be 'zeros' or 'ones', got {self.y0!r}")
        if self.residual_floor < 0.0:
            raise InvalidParameter(f"residual_floor must be >= 0, got {self.residual_floor}")

    def with_overrides(self, **overrides) -> "IpmConfig":
        """Copy with the non-None overrides applied"""
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: Optional["IpmConfig"] = None) -> "IpmConfig":
        """Build a config from string settings (config file or flags)"""
        overrides = {}
        known = {f.name for f in fields(cls)}
        for raw_key, raw_value in values.items():
            key = CONFIG_ALIASES.get(raw_key.strip().lower().replace("-", "_"), raw_key.strip().lower().replace("-", "_"))
            if key not in known:
                raise InvalidParameter(f"unknown configuration key {raw_key!r}")
            if raw_value is None or raw_value == "":
                continue
            parser = _PARSERS.get(key, str)
            try:
                overrides[key] = parser(raw_value) if isinstance(raw_value, str) else raw_value
            except ValueError:
                raise InvalidParameter(f"invalid value {raw_value!r} for {key}") from None
        # a fixed cap implies the fixed policy unless one is named
        if "inner_max_iters" in overrides:
            overrides.setdefault("inner_max_policy", InnerMaxPolicy.FIXED)
        return (base or cls()).with_overrides(**overrides)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() == "none" else float(text)


def _parse_optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() == "none" else int(text)


# Long CLI flag names that differ from the field names
CONFIG_ALIASES: Dict[str, str] = {
    "eps": "epsilon",
    "relative_eps": "relative_epsilon",
    "w": "sketch_w",
    "s": "sketch_s",
    "inner_max": "inner_max_iters",
    "max_inner": "inner_max_iters",
}

_PARSERS: Dict[str, Callable[[str], Any]] = {
    "gamma": float,
    "sigma": float,
    "epsilon": float,
    "relative_epsilon": _parse_bool,
    "zeta": float,
    "delta": _parse_optional_float,
    "tol_cg": float,
    "solver": InnerSolverKind,
    "inner_max_policy": InnerMaxPolicy,
    "inner_max_iters": int,
    "max_inner_unpreconditioned": int,
    "sketch_kind": SketchKind,
    "sketch_w": _parse_optional_int,
    "sketch_s": _parse_optional_int,
    "max_outer": int,
    "seed": int,
    "y0": str,
    "residual_floor": float,
    "track_condition_numbers": _parse_bool,
    "kappa_max_rows": int,
}


def load_config_file(path: Union[str, Path]) -> Dict[str, Optional[str]]:
    """Read key=value settings; missing file is an error, unknown keys are checked later"""
    path = Path(path)
    if not path.is_file():
        raise InvalidParameter(f"config file not found: {path}")
    try:
        values = dotenv_values(path)
    except UnicodeDecodeError as error:
        raise InvalidParameter(f"config file {path} is not UTF-8 text: {error.reason}") from error
    logger.debug("loaded %d settings from %s", len(values), path)
    return dict(values)
