"""Run configuration.

Config files are flat TOML: one ``key = value`` per line, no tables. Keys
mirror the fields of :class:`RunConfig`. A minimal file::

    segments = 60
    grid_rows = 1
    grid_cols = 2
    ladder = [1, 2.5, 5, 8, 16, 40]
    seed = 7

Trace paths are resolved relative to the config file. When no capacity or
viewport file is given, traces come from the synthetic generator keyed by
``seed`` and the ``synthetic_*`` keys.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError
from .model import HALF_VIEW, QUARTER_VIEW
from .traces import SyntheticTraceSpec

SYNTHETIC_PREFIX = "synthetic_"


@dataclass(frozen=True)
class RunConfig:
    # video
    segments: int = 60
    segment_length: float = 1.0
    initial_buffer: float = 2.0
    grid_rows: int = 1
    grid_cols: int = 2
    fov_extent: tuple | None = None
    ladder: tuple = (1.0, 2.5, 5.0, 8.0, 16.0, 40.0)
    mode: str = "discrete"
    # QoE
    l_rb: float = 0.5
    l_bd_e: float = 0.1
    l_bd_a: float = 0.1
    utility: str = "linear"
    utility_scale: float = 1.0
    # policy
    policy: str = "obs360"
    policies: tuple = ("obs360", "constant:median")
    alpha: float = 1.0
    alpha_schedule: str = "fixed"
    alpha0: float = 1.0
    gamma: float = 2.0
    r0: tuple | None = None
    optimum_method: str = "auto"
    # simulation
    reveal: str = "playback"
    on_exhaustion: str = "wrap"
    # traces
    capacity_trace: str | None = None
    user_trace: str | None = None
    reference_trace: str | None = None
    d_min: float | None = None
    d_max: float | None = None
    seed: int | None = None
    synthetic: SyntheticTraceSpec = field(default_factory=SyntheticTraceSpec)
    # output
    output_dir: str = "out"
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in ("discrete", "convex"):
            raise ConfigError(f"mode must be discrete or convex, got {self.mode!r}")
        if self.alpha_schedule not in ("fixed", "horizon"):
            raise ConfigError("alpha_schedule must be fixed or horizon")
        if self.reveal not in ("playback", "download"):
            raise ConfigError("reveal must be playback or download")
        if self.on_exhaustion not in ("wrap", "raise"):
            raise ConfigError("on_exhaustion must be wrap or raise")
        if self.segments < 1 or self.grid_rows < 1 or self.grid_cols < 1:
            raise ConfigError("segments and grid dimensions must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        needs_synthetic = self.capacity_trace is None or self.user_trace is None
        if needs_synthetic and self.seed is None:
            raise ConfigError("synthetic traces need a seed")
        if (self.user_trace is None) != (self.reference_trace is None):
            raise ConfigError("user_trace and reference_trace must be given together")

    @property
    def tiles(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def extent(self) -> tuple:
        if self.fov_extent is not None:
            return tuple(self.fov_extent)
        return HALF_VIEW if (self.grid_rows, self.grid_cols) == (1, 2) else QUARTER_VIEW

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_TUPLE_KEYS = {"fov_extent", "ladder", "policies", "r0"}
_INT_KEYS = {"segments", "grid_rows", "grid_cols", "seed", "jobs"}
_STR_KEYS = {"mode", "utility", "policy", "alpha_schedule", "optimum_method", "reveal",
             "on_exhaustion", "capacity_trace", "user_trace", "reference_trace", "output_dir"}


def _coerce(key, value):
    if key in _TUPLE_KEYS:
        if not isinstance(value, list):
            raise ConfigError(f"{key} must be a list")
        return tuple(value)
    if isinstance(value, (dict, list)):
        raise ConfigError(f"{key} must be a scalar")
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number")
    return float(value)


def config_from_dict(raw: dict, base_dir=None) -> RunConfig:
    names = {f.name for f in fields(RunConfig)} - {"synthetic"}
    syn_names = {f.name for f in fields(SyntheticTraceSpec)}
    kwargs, syn = {}, {}
    for key, value in raw.items():
        if key.startswith(SYNTHETIC_PREFIX) and key[len(SYNTHETIC_PREFIX):] in syn_names:
            sub = key[len(SYNTHETIC_PREFIX):]
            syn[sub] = int(value) if sub == "capacity_seconds" else _coerce(sub, value)
        elif key in names:
            kwargs[key] = _coerce(key, value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if base_dir is not None:
        for key in ("capacity_trace", "user_trace", "reference_trace"):
            if kwargs.get(key):
                kwargs[key] = str(Path(base_dir) / kwargs[key])
    try:
        kwargs["synthetic"] = SyntheticTraceSpec(**syn)
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw, path.parent)
