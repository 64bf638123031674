"""Video geometry, bitrate ladders and traces.

Tiles sit on an equirectangular frame: row 1 is the top band (pitch +90),
column 1 starts at yaw -180. Tile *indices* are not positional; they are
assigned relative to the top-left tile of a per-segment reference FoV, so
that index 1 is always the reference corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgument, ValidationError

# FoV extents (vertical span, horizontal span) in degrees
HALF_VIEW = (180.0, 180.0)
QUARTER_VIEW = (90.0, 180.0)
FULL_SPHERE = (180.0, 360.0)

_SNAP = 1e-9


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BitrateLadder:
    """Ordered bitrate set R (Mbps).

    With ``convex=True`` decisions may take any value in the hull
    ``[R_1, R_|R|]``; level arithmetic still refers to the discrete set.
    """

    levels: tuple
    convex: bool = False

    def __post_init__(self):
        levels = tuple(float(x) for x in self.levels)
        if len(levels) < 2:
            raise InvalidArgument("a ladder needs at least two levels")
        if levels[0] <= 0:
            raise InvalidArgument("bitrate levels must be positive")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InvalidArgument("bitrate levels must be strictly increasing")
        object.__setattr__(self, "levels", levels)

    def __len__(self):
        return len(self.levels)

    @cached_property
    def array(self) -> np.ndarray:
        return _frozen_array(self.levels)

    @property
    def r_min(self) -> float:
        return self.levels[0]

    @property
    def r_max(self) -> float:
        return self.levels[-1]

    @property
    def median_level(self) -> int:
        """1-based level of the (lower) median bitrate."""
        return (len(self.levels) - 1) // 2 + 1

    def at(self, level):
        """Bitrate(s) for 1-based level index(es)."""
        lv = np.asarray(level)
        if np.any(lv < 1) or np.any(lv > len(self.levels)):
            raise InvalidArgument(f"level out of range 1..{len(self.levels)}: {level}")
        out = self.array[lv - 1]
        return float(out) if out.ndim == 0 else out

    def level_of(self, r):
        """1-based level of ladder member(s) ``r``; off-ladder values raise."""
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.array, r)
        idx = np.clip(idx, 0, len(self.levels) - 1)
        # allow either neighbour to absorb float noise
        lo = np.clip(idx - 1, 0, len(self.levels) - 1)
        pick = np.where(np.abs(self.array[lo] - r) < np.abs(self.array[idx] - r), lo, idx)
        if np.any(np.abs(self.array[pick] - r) > 1e-9 * np.maximum(1.0, np.abs(r))):
            raise InvalidArgument(f"value not on the ladder {self.levels}: {r}")
        out = pick + 1
        return int(out) if out.ndim == 0 else out

    def contains(self, r) -> bool:
        try:
            self.level_of(r)
        except InvalidArgument:
            return False
        return True

    def in_hull(self, r, tol=1e-12) -> bool:
        r = np.asarray(r, dtype=float)
        return bool(np.all(r >= self.r_min - tol) and np.all(r <= self.r_max + tol))

    def clip(self, r):
        return np.clip(np.asarray(r, dtype=float), self.r_min, self.r_max)

    def nearest(self, x) -> float:
        return ladder_nearest(x, self)

    def feasible(self, r) -> bool:
        return self.in_hull(r) if self.convex else self.contains(r)


def ladder_nearest(x: float, ladder: BitrateLadder) -> float:
    """Ladder level closest to ``x``; equidistant ties go to the lower level."""
    levels = ladder.array
    dist = np.abs(levels - float(x))
    # argmin returns the first minimum, which is the lower level
    return float(levels[int(np.argmin(dist))])


@dataclass(frozen=True)
class TileGrid:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidArgument("grid needs at least one row and one column")

    @property
    def tiles(self) -> int:
        return self.rows * self.cols

    @property
    def tile_height(self) -> float:
        return 180.0 / self.rows

    @property
    def tile_width(self) -> float:
        return 360.0 / self.cols


def tile_index(m: int, n: int, m0: int, n0: int, grid: TileGrid) -> int:
    """Index (1..K) of the tile at row ``m``, column ``n`` when the reference
    FoV's top-left tile is at ``(m0, n0)``.

    Rows and columns wrap around; the reference corner is always tile 1.
    """
    M, N = grid.rows, grid.cols
    for name, v, hi in (("m", m, M), ("m0", m0, M), ("n", n, N), ("n0", n0, N)):
        if not 1 <= v <= hi:
            raise InvalidArgument(f"{name}={v} outside 1..{hi}")
    return N * ((m - m0) % M) + ((n - n0) % N + 1)


@dataclass(frozen=True)
class ViewportTrace:
    """Per-segment viewport centres (degrees) and the FoV angular extent."""

    pitch: np.ndarray
    yaw: np.ndarray
    fov_extent: tuple = QUARTER_VIEW

    def __post_init__(self):
        pitch = _frozen_array(self.pitch)
        yaw = _frozen_array(self.yaw)
        if pitch.shape != yaw.shape or pitch.ndim != 1:
            raise ValidationError("pitch and yaw must be 1-d and of equal length")
        if np.any(np.abs(pitch) > 90) or np.any(np.abs(yaw) > 180):
            raise ValidationError("pitch must lie in [-90, 90] and yaw in [-180, 180]")
        v, h = (float(x) for x in self.fov_extent)
        if not (0 < v <= 180 and 0 < h <= 360):
            raise ValidationError(f"FoV extent out of range: {self.fov_extent}")
        object.__setattr__(self, "pitch", pitch)
        object.__setattr__(self, "yaw", yaw)
        object.__setattr__(self, "fov_extent", (v, h))

    def __len__(self):
        return len(self.pitch)

    def rotated(self, d_yaw: float) -> "ViewportTrace":
        yaw = (self.yaw + d_yaw + 180.0) % 360.0 - 180.0
        return ViewportTrace(self.pitch, yaw, self.fov_extent)


@dataclass(frozen=True)
class OverlapMap:
    """``omega[i, k]``: fraction of tile k of segment i inside the user's FoV."""

    omega: np.ndarray

    def __post_init__(self):
        omega = _frozen_array(self.omega)
        if omega.ndim != 2:
            raise InvalidArgument("omega must be a (segments, tiles) array")
        if np.any(omega < -1e-12) or np.any(omega > 1 + 1e-12):
            raise InvalidArgument("overlap fractions must lie in [0, 1]")
        object.__setattr__(self, "omega", omega)

    @property
    def segments(self) -> int:
        return self.omega.shape[0]

    @property
    def tiles(self) -> int:
        return self.omega.shape[1]

    def __getitem__(self, i):
        return self.omega[i]


def _fov_rect(pitch, yaw, extent):
    """(bottom, top, left) of the FoV rectangle; the centre is pushed back
    inside the poles so the rectangle keeps its full area."""
    v, h = extent
    p = min(max(pitch, -90.0 + v / 2), 90.0 - v / 2)
    return p - v / 2, p + v / 2, yaw - h / 2


def _interval_overlap(a1, a2, b1, b2):
    return max(0.0, min(a2, b2) - max(a1, b1))


def _circular_overlap(left, span, c1, c2):
    """Length of [left, left+span) on the 360-degree circle inside [c1, c2]."""
    if span >= 360.0:
        return c2 - c1
    start = left % 360.0
    return (_interval_overlap(start, start + span, c1, c2)
            + _interval_overlap(start - 360.0, start + span - 360.0, c1, c2))


def _cell_overlap(pitch, yaw, extent, grid):
    """(M, N) array of per-cell overlap fractions in positional order."""
    bottom, top, left = _fov_rect(pitch, yaw, extent)
    th, tw = grid.tile_height, grid.tile_width
    rows = np.array([
        _interval_overlap(bottom, top, 90.0 - (m + 1) * th, 90.0 - m * th) / th
        for m in range(grid.rows)
    ])
    cols = np.array([
        _circular_overlap(left + 180.0, extent[1], n * tw, (n + 1) * tw) / tw
        for n in range(grid.cols)
    ])
    return np.outer(rows, cols)


def reference_corner(pitch, yaw, extent, grid):
    """(m0, n0): the tile holding the top-left corner of a reference FoV."""
    _, top, left = _fov_rect(pitch, yaw, extent)
    m0 = int(math.floor((90.0 - top) / grid.tile_height + _SNAP)) + 1
    m0 = min(max(m0, 1), grid.rows)
    x = ((left + 180.0) % 360.0) / grid.tile_width
    n0 = int(math.floor(x + _SNAP)) % grid.cols + 1
    return m0, n0


def overlap_fractions(user: ViewportTrace, reference: ViewportTrace,
                      grid: TileGrid) -> OverlapMap:
    """Convert a user viewport trace to per-tile overlap fractions, with tile
    indices taken relative to the reference viewport of each segment."""
    if len(user) != len(reference):
        raise InvalidArgument(
            f"user trace has {len(user)} segments, reference has {len(reference)}")
    K = grid.tiles
    omega = np.zeros((len(user), K))
    for i in range(len(user)):
        cells = _cell_overlap(user.pitch[i], user.yaw[i], user.fov_extent, grid)
        m0, n0 = reference_corner(reference.pitch[i], reference.yaw[i],
                                  reference.fov_extent, grid)
        for m in range(grid.rows):
            for n in range(grid.cols):
                omega[i, tile_index(m + 1, n + 1, m0, n0, grid) - 1] = cells[m, n]
    return OverlapMap(np.clip(omega, 0.0, 1.0))


@dataclass(frozen=True)
class CapacityTrace:
    """Piecewise-constant downloading capacity.

    Sample ``j`` holds on ``[times[j], times[j+1])``; the last sample holds
    until ``duration``, which defaults to one more sample interval.
    """

    times: np.ndarray
    mbps: np.ndarray
    d_min: float | None = None
    d_max: float | None = None
    duration: float | None = None

    def __post_init__(self):
        times = _frozen_array(self.times)
        mbps = _frozen_array(self.mbps)
        if times.ndim != 1 or times.shape != mbps.shape or len(times) == 0:
            raise ValidationError("capacity trace needs matching non-empty time/rate columns")
        if times[0] != 0:
            raise ValidationError("capacity trace must start at time 0")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("capacity timestamps must be strictly increasing")
        d_min = float(mbps.min()) if self.d_min is None else float(self.d_min)
        d_max = float(mbps.max()) if self.d_max is None else float(self.d_max)
        if d_min <= 0:
            raise ValidationError("d_min must be positive")
        if np.any(mbps < d_min) or np.any(mbps > d_max):
            raise ValidationError(f"capacity samples outside [{d_min}, {d_max}]")
        if self.duration is None:
            step = times[-1] - times[-2] if len(times) > 1 else 1.0
            duration = float(times[-1] + step)
        else:
            duration = float(self.duration)
        if duration <= times[-1]:
            raise ValidationError("duration must exceed the last timestamp")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "mbps", mbps)
        object.__setattr__(self, "d_min", d_min)
        object.__setattr__(self, "d_max", d_max)
        object.__setattr__(self, "duration", duration)

    @classmethod
    def constant(cls, mbps: float, duration: float = 1e6) -> "CapacityTrace":
        return cls([0.0], [mbps], duration=duration)

    @cached_property
    def edges(self) -> np.ndarray:
        return _frozen_array(np.append(self.times, self.duration))

    @cached_property
    def cumulative(self) -> np.ndarray:
        """Megabits deliverable from time 0 up to each edge."""
        return _frozen_array(np.concatenate([[0.0], np.cumsum(self.mbps * np.diff(self.edges))]))

    @property
    def total_bits(self) -> float:
        return float(self.cumulative[-1])

    def rate_at(self, t: float) -> float:
        j = int(np.searchsorted(self.times, t % self.duration, side="right")) - 1
        return float(self.mbps[j])

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class VideoConfig:
    segment_count: int
    segment_length: float = 1.0
    initial_buffer: float = 2.0

    def __post_init__(self):
        if self.segment_count < 1:
            raise InvalidArgument("need at least one segment")
        if self.segment_length <= 0:
            raise InvalidArgument("segment length must be positive")
        if self.initial_buffer < 0:
            raise InvalidArgument("initial buffer cannot be negative")
