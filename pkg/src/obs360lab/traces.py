"""Trace file formats and seeded synthetic trace generators.

Viewport CSV::

    segment,pitch_deg,yaw_deg
    1,0.0,-12.5

Capacity CSV::

    time_s,mbps
    0,31.2

Both are UTF-8, comma separated, with a decimal point.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .model import QUARTER_VIEW, CapacityTrace, ViewportTrace

VIEWPORT_HEADER = ("segment", "pitch_deg", "yaw_deg")
CAPACITY_HEADER = ("time_s", "mbps")


def _rows(text: str, header: tuple, path=None):
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError("empty file", 1, path) from None
    if tuple(c.strip() for c in first) != header:
        raise ParseError(f"expected header {','.join(header)}, got {','.join(first)}", 1, path)
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno, path)
        try:
            values = [float(c) for c in row]
        except ValueError:
            raise ParseError(f"non-numeric field in {row}", lineno, path) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(f"non-finite value in {row}", lineno, path)
        yield lineno, values


def parse_viewport(text: str, fov_extent=QUARTER_VIEW, path=None) -> ViewportTrace:
    pitch, yaw = [], []
    for lineno, (seg, p, y) in _rows(text, VIEWPORT_HEADER, path):
        if seg != len(pitch) + 1:
            raise ValidationError(f"line {lineno}: expected segment {len(pitch) + 1}, got {seg:g}")
        if not -90 <= p <= 90:
            raise ValidationError(f"line {lineno}: pitch {p} outside [-90, 90]")
        if not -180 <= y <= 180:
            raise ValidationError(f"line {lineno}: yaw {y} outside [-180, 180]")
        pitch.append(p)
        yaw.append(y)
    if not pitch:
        raise ValidationError("viewport trace has no rows")
    return ViewportTrace(np.array(pitch), np.array(yaw), fov_extent)


def resample_1hz(times, mbps):
    """Zero-order hold onto whole seconds: each second takes the sample in
    effect at its start."""
    times = np.asarray(times, dtype=float)
    seconds = np.arange(0.0, math.floor(times[-1]) + 1.0)
    idx = np.searchsorted(times, seconds, side="right") - 1
    return seconds, np.asarray(mbps, dtype=float)[idx]


def parse_capacity(text: str, d_min=None, d_max=None, path=None) -> CapacityTrace:
    times, rates = [], []
    for lineno, (t, d) in _rows(text, CAPACITY_HEADER, path):
        if times and t <= times[-1]:
            raise ValidationError(f"line {lineno}: timestamps must be strictly increasing")
        times.append(t)
        rates.append(d)
    if not times:
        raise ValidationError("capacity trace has no rows")
    if times[0] != 0:
        raise ValidationError("capacity trace must start at time 0")
    if len(times) > 1 and min(np.diff(times)) < 1.0:
        times, rates = resample_1hz(times, rates)
    return CapacityTrace(np.array(times), np.array(rates), d_min, d_max)


def read_viewport(path, fov_extent=QUARTER_VIEW) -> ViewportTrace:
    path = Path(path)
    return parse_viewport(path.read_text(encoding="utf-8"), fov_extent, path)


def read_capacity(path, d_min=None, d_max=None) -> CapacityTrace:
    path = Path(path)
    return parse_capacity(path.read_text(encoding="utf-8"), d_min, d_max, path)


def format_viewport(trace: ViewportTrace) -> str:
    lines = [",".join(VIEWPORT_HEADER)]
    for i, (p, y) in enumerate(zip(trace.pitch, trace.yaw), start=1):
        lines.append(f"{i},{float(p)!r},{float(y)!r}")
    return "\n".join(lines) + "\n"


def format_capacity(trace: CapacityTrace) -> str:
    lines = [",".join(CAPACITY_HEADER)]
    lines += [f"{float(t)!r},{float(d)!r}" for t, d in zip(trace.times, trace.mbps)]
    return "\n".join(lines) + "\n"


def write_viewport(trace: ViewportTrace, path):
    Path(path).write_text(format_viewport(trace), encoding="utf-8")


def write_capacity(trace: CapacityTrace, path):
    Path(path).write_text(format_capacity(trace), encoding="utf-8")


def sniff(path) -> str:
    """'capacity' or 'viewport', judged by the header line."""
    with open(path, encoding="utf-8") as fh:
        head = tuple(c.strip() for c in fh.readline().strip().split(","))
    if head == CAPACITY_HEADER:
        return "capacity"
    if head == VIEWPORT_HEADER:
        return "viewport"
    raise ParseError(f"unrecognized header {','.join(head)}", 1, path)


# --- synthetic traces -----------------------------------------------------

@dataclass(frozen=True)
class SyntheticTraceSpec:
    """Bounded random walks standing in for measured traces.

    Capacity: a walk from ``capacity_base`` with uniform steps in
    ``[-capacity_step, capacity_step]``, clipped to ``[d_min, d_max]``, plus
    an optional linear ramp (Mbps per second). Viewports: the reference FoV
    drifts by its own walk; the user keeps a fixed preference offset from
    it plus a deviation walk bounded by ``viewport_max_dev`` degrees.
    """

    capacity_base: float = 30.0
    capacity_step: float = 5.0
    d_min: float = 5.0
    d_max: float = 60.0
    capacity_ramp: float = 0.0
    capacity_seconds: int | None = None
    reference_pitch_step: float = 0.0
    reference_yaw_step: float = 5.0
    preference_pitch: float = 0.0
    preference_yaw: float = 60.0
    viewport_step: float = 10.0
    viewport_max_dev: float = 45.0

    def __post_init__(self):
        if not 0 < self.d_min <= self.capacity_base <= self.d_max:
            raise ValidationError("need 0 < d_min <= capacity_base <= d_max")
        for name in ("capacity_step", "reference_pitch_step", "reference_yaw_step",
                     "viewport_step", "viewport_max_dev"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")


def _walk(rng, n, step, start=0.0, lo=-np.inf, hi=np.inf):
    out = np.empty(n)
    x = start
    for t in range(n):
        if t:
            x = min(max(x + rng.uniform(-step, step), lo), hi)
        out[t] = x
    return out


def _wrap_yaw(y):
    return (np.asarray(y) + 180.0) % 360.0 - 180.0


def generate_synthetic(spec: SyntheticTraceSpec, seed: int, segments: int,
                       fov_extent=QUARTER_VIEW):
    """(capacity, user viewport, reference viewport), reproducible per seed."""
    cap_seq, ref_seq, user_seq = np.random.SeedSequence(seed).spawn(3)
    n = spec.capacity_seconds or max(4 * segments, 60)

    rng = np.random.default_rng(cap_seq)
    walk = _walk(rng, n, spec.capacity_step, spec.capacity_base, spec.d_min, spec.d_max)
    rates = np.clip(walk + spec.capacity_ramp * np.arange(n), spec.d_min, spec.d_max)
    capacity = CapacityTrace(np.arange(float(n)), rates, spec.d_min, spec.d_max)

    rng = np.random.default_rng(ref_seq)
    ref_pitch = _walk(rng, segments, spec.reference_pitch_step, 0.0, -60.0, 60.0)
    ref_yaw = _wrap_yaw(np.cumsum(np.r_[0.0, rng.uniform(-1, 1, segments - 1)]
                                  * spec.reference_yaw_step))
    reference = ViewportTrace(ref_pitch, ref_yaw, fov_extent)

    rng = np.random.default_rng(user_seq)
    dev_p = _walk(rng, segments, spec.viewport_step, 0.0, -spec.viewport_max_dev, spec.viewport_max_dev)
    dev_y = _walk(rng, segments, spec.viewport_step, 0.0, -spec.viewport_max_dev, spec.viewport_max_dev)
    user_pitch = np.clip(ref_pitch + spec.preference_pitch + dev_p, -90.0, 90.0)
    user_yaw = _wrap_yaw(ref_yaw + spec.preference_yaw + dev_y)
    user = ViewportTrace(user_pitch, user_yaw, fov_extent)
    return capacity, user, reference
