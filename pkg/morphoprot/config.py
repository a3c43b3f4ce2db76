"""Run configuration: constants <- environment <- config file <- flags.

Environment Variables:
    MORPHOPROT_CACHE: Cache directory for structures and signatures
    MORPHOPROT_FETCH_URL: Structure download URL template ({id} placeholder)
    MORPHOPROT_FETCH_TIMEOUT: Download timeout in seconds
    MORPHOPROT_THREADS: Worker threads for slices and faces
    MORPHOPROT_LOG_LEVEL: Logging level for the CLI
"""
import os
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv

from . import constants as C
from .errors import ConfigError
from .pipelines import Method1Params, Method2Params, Thresholds


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    TABLE = "table"


def _truthy(value: Optional[str]) -> bool:
    return str(value or "").strip().lower() in {"1", "true", "yes", "on"}


def _int_env(value: Optional[str], default: Optional[int]) -> Optional[int]:
    try:
        return int(value) if value not in {None, ""} else default
    except ValueError:
        return default


def _float_env(value: Optional[str], default: Optional[float]) -> Optional[float]:
    try:
        return float(value) if value not in {None, ""} else default
    except ValueError:
        return default


def load_env() -> None:
    """Load a .env from the working directory if present."""
    load_dotenv(Path.cwd() / ".env")


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a CLI run."""
    # Method 1
    selector: str = C.M1_SELECTOR
    slice_thickness: float = C.M1_SLICE_THICKNESS
    resolution: int = C.M1_RESOLUTION
    dot_radius: int = C.M1_DOT_RADIUS
    growth_shape: str = C.M1_GROWTH_SHAPE
    growth_step: int = C.M1_GROWTH_STEP
    max_growth_iters: int = C.M1_MAX_GROWTH_ITERS
    skeleton_shape: str = C.M1_SKELETON_SHAPE
    skeleton_size: int = C.M1_SKELETON_SIZE
    box_max: int = C.M1_BOX_MAX
    fit_window: Optional[str] = None
    # Method 2
    face_selector: str = C.M2_SELECTOR
    face_resolution: int = C.M2_RESOLUTION
    stroke_radius: int = C.M2_STROKE_RADIUS
    trace: bool = C.M2_TRACE
    geodesic_shape: str = C.M2_GEODESIC_SHAPE
    geodesic_size: int = C.M2_GEODESIC_SIZE
    max_iters: int = C.M2_MAX_ITERS
    # Verdict
    rho_threshold: float = C.RHO_THRESHOLD
    delta_threshold: int = C.DELTA_THRESHOLD
    # Runtime
    cache_dir: str = C.DEFAULT_CACHE_DIR
    fetch_url: str = C.DEFAULT_FETCH_URL
    fetch_timeout: float = C.FETCH_TIMEOUT_SECONDS
    include_hetero: bool = False
    format: Optional[str] = None
    threads: int = 1
    log_level: str = "WARNING"

    def merge(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """New config with ``overrides`` applied; None values are ignored."""
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}", key=unknown[0])
        changes = {k: v for k, v in overrides.items() if v is not None}
        merged = replace(self, **changes)
        merged.validate()
        return merged

    def validate(self) -> None:
        try:
            if self.format is not None:
                OutputFormat(self.format)
        except ValueError:
            raise ConfigError(f"format must be json, csv or table, got {self.format!r}", key="format") from None
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}", key="threads")

    @property
    def output_format(self) -> OutputFormat:
        """Requested format, JSON when none was given."""
        return OutputFormat(self.format or OutputFormat.JSON.value)

    @property
    def cache_path(self) -> Path:
        return Path(self.cache_dir).expanduser()

    def method1(self) -> Method1Params:
        try:
            return Method1Params(
                selector=self.selector,
                slice_thickness=self.slice_thickness,
                resolution=self.resolution,
                dot_radius=self.dot_radius,
                growth_shape=self.growth_shape,
                growth_step=self.growth_step,
                max_growth_iters=self.max_growth_iters,
                skeleton_shape=self.skeleton_shape,
                skeleton_size=self.skeleton_size,
                box_max=self.box_max,
                fit_window=self.fit_window,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def method2(self) -> Method2Params:
        try:
            return Method2Params(
                selector=self.face_selector,
                resolution=self.face_resolution,
                stroke_radius=self.stroke_radius,
                trace=self.trace,
                geodesic_shape=self.geodesic_shape,
                geodesic_size=self.geodesic_size,
                max_iters=self.max_iters,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def thresholds(self) -> Thresholds:
        return Thresholds(rho=self.rho_threshold, delta=self.delta_threshold)


def _converter(default: Any):
    if isinstance(default, bool):
        return _truthy
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


_CONVERTERS = {f.name: _converter(f.default) for f in fields(RunConfig)}


def _convert(key: str, raw: Optional[str]) -> Any:
    if key == "fit_window":
        return None if raw in {None, "", "none", "off"} else raw
    try:
        return _CONVERTERS[key](raw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {raw!r}", key=key) from None


def resolve_defaults(env: Mapping[str, str]) -> dict:
    """Overrides taken from MORPHOPROT_* environment variables."""
    return {
        "cache_dir": env.get("MORPHOPROT_CACHE") or None,
        "fetch_url": env.get("MORPHOPROT_FETCH_URL") or None,
        "fetch_timeout": _float_env(env.get("MORPHOPROT_FETCH_TIMEOUT"), None),
        "threads": _int_env(env.get("MORPHOPROT_THREADS"), None),
        "log_level": env.get("MORPHOPROT_LOG_LEVEL") or None,
    }


def load_config_file(path: Union[str, Path]) -> dict:
    """Parse a flat key=value file (``.env`` grammar) into typed overrides.

    Raises:
        ConfigError: unknown key or unconvertible value
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = dotenv_values(path)
    values = {}
    for key, value in raw.items():
        name = key.strip().lower().replace("-", "_")
        if name not in _CONVERTERS:
            raise ConfigError(f"unknown configuration key in {path}: {key}", key=key)
        values[name] = _convert(name, value)
    return values


def build_run_config(
    config_path: Optional[Union[str, Path]] = None,
    flags: Optional[Mapping[str, Any]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Defaults <- environment <- config file <- flags, rightmost wins."""
    config = RunConfig().merge(resolve_defaults(os.environ if env is None else env))
    if config_path:
        config = config.merge(load_config_file(config_path))
    return config.merge(dict(flags or {}))
