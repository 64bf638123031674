"""Deterministic session simulator.

Tiles are downloaded back to back in (segment, tile) order over a
piecewise-constant capacity trace, each link fully utilized. Decisions for
segment i are taken at the instant segment i-1 finishes downloading. The
initial buffer is modelled as pre-buffered content whose playback ends at
wall time ``initial_buffer``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import HorizonExceeded, InvalidArgument, InvalidDecision
from .model import BitrateLadder, CapacityTrace, OverlapMap, VideoConfig
from .qoe import QoEBreakdown, QoEParams, SegmentContext, qoe_breakdown


# --- capacity integration -------------------------------------------------

def _cumulative_at(trace: CapacityTrace, t):
    """Megabits deliverable on [0, t) with the trace repeated cyclically."""
    t = np.asarray(t, dtype=float)
    period = trace.duration
    q = np.floor(t / period)
    s = t - q * period
    j = np.clip(np.searchsorted(trace.edges, s, side="right") - 1, 0, len(trace) - 1)
    return q * trace.total_bits + trace.cumulative[j] + trace.mbps[j] * (s - trace.edges[j])


def finish_times(trace: CapacityTrace, t0, bits, wrap: bool = True):
    """Vectorized solution of  integral_{t0}^{t} d(s) ds = bits  for t."""
    t0 = np.asarray(t0, dtype=float)
    bits = np.asarray(bits, dtype=float)
    if np.any(bits < 0):
        raise InvalidArgument("cannot download a negative number of bits")
    target = _cumulative_at(trace, t0) + bits
    total = trace.total_bits
    if not wrap and (np.any(t0 > trace.duration) or np.any(target > total * (1 + 1e-12))):
        raise HorizonExceeded(
            f"capacity trace of {trace.duration:g} s exhausted before the download finished")
    q = np.floor(target / total)
    rem = target - q * total
    j = np.clip(np.searchsorted(trace.cumulative, rem, side="right") - 1, 0, len(trace) - 1)
    t = q * trace.duration + trace.edges[j] + (rem - trace.cumulative[j]) / trace.mbps[j]
    return np.where(bits == 0, t0, np.maximum(t, t0))


def integrate_capacity(trace: CapacityTrace, t0: float, bits: float, wrap: bool = True) -> float:
    """Earliest time at which ``bits`` megabits started at ``t0`` are delivered."""
    if bits == 0:
        return float(t0)
    return float(finish_times(trace, t0, bits, wrap))


def delivered_bits(trace: CapacityTrace, t0: float, t1: float) -> float:
    """Integral of the capacity over [t0, t1]."""
    return float(_cumulative_at(trace, t1) - _cumulative_at(trace, t0))


# --- per-segment dynamics -------------------------------------------------

@dataclass(frozen=True)
class DownloadRecord:
    starts: np.ndarray
    finishes: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.finishes[-1] - self.starts[0])

    def dbar(self, r, beta) -> float:
        """Delivered bits over download duration."""
        return float(np.sum(r) * beta / self.duration)


def step_download(r, trace: CapacityTrace, t_start: float, buffer_before: float,
                  beta: float, wrap: bool = True):
    """Download one segment's tiles in order starting at ``t_start``.

    Returns the download record and the buffer after the segment arrives.
    """
    r = np.asarray(r, dtype=float)
    starts = np.empty(len(r))
    finishes = np.empty(len(r))
    t = t_start
    for k, rate in enumerate(r):
        starts[k] = t
        t = integrate_capacity(trace, t, rate * beta, wrap)
        finishes[k] = t
    rec = DownloadRecord(starts, finishes)
    buffer_after = max(buffer_before - rec.duration, 0.0) + beta
    return rec, buffer_after


def playback_update(play_end_prev: float, download_finish: float, beta: float):
    """(play_start, play_end, rebuffer) of a segment whose last tile lands at
    ``download_finish``; the previous segment stops playing at ``play_end_prev``."""
    start = max(play_end_prev, download_finish)
    return start, start + beta, max(download_finish - play_end_prev, 0.0)


def auxiliary_sets(decision_times: Sequence[float], reveal_times: Sequence[float]):
    """Group segments by the decision interval in which they are revealed.

    Segment i' belongs to set i when its reveal time lies in
    ``(decision_times[i-1], decision_times[i]]`` (1-based, with
    decision_times[I+1] = +inf). Returns ``(sets, tilde)`` where ``sets[i-1]``
    is the tuple for decision i = 1..I+1 and ``tilde[i'-1] = i - 1``.
    """
    bounds = list(decision_times) + [np.inf]
    sets = [[] for _ in bounds]
    tilde = np.empty(len(reveal_times), dtype=int)
    for j, t in enumerate(reveal_times):
        pos = bisect.bisect_left(bounds, t)
        sets[pos].append(j + 1)
        tilde[j] = pos
    return [tuple(s) for s in sets], tilde


# --- sessions -------------------------------------------------------------

@dataclass(frozen=True)
class Realization:
    """What the player learns about segment ``index`` once it is revealed."""

    index: int
    decision: np.ndarray
    context: SegmentContext


class Policy(Protocol):
    def decide(self, i: int, revealed: list[Realization]) -> np.ndarray:
        ...


@dataclass(frozen=True)
class SessionLog:
    """Complete record of one simulated session (arrays indexed by segment-1)."""

    decisions: np.ndarray       # (I, K) bitrates
    omega: np.ndarray           # (I, K) realized overlaps
    tile_start: np.ndarray      # (I, K)
    tile_finish: np.ndarray     # (I, K)
    dbar: np.ndarray            # (I,)
    buffers: np.ndarray         # (I,) b_i after segment i arrives
    buffers_before: np.ndarray  # (I,) b_{i-1}
    play_start: np.ndarray
    play_end: np.ndarray
    rebuffer: np.ndarray
    reveal_times: np.ndarray
    aux_sets: tuple             # aux_sets[i-1] = segments revealed at decision i, i=1..I+1
    tilde: np.ndarray           # tilde[i-1]: index of the decision after which i is revealed
    beta: float
    initial_buffer: float

    @property
    def segments(self) -> int:
        return self.decisions.shape[0]

    @property
    def tiles(self) -> int:
        return self.decisions.shape[1]

    @property
    def decision_times(self) -> np.ndarray:
        return self.tile_start[:, 0]

    @property
    def durations(self) -> np.ndarray:
        return self.tile_finish[:, -1] - self.tile_start[:, 0]

    @property
    def mus(self) -> np.ndarray:
        return np.array([w @ r for w, r in zip(self.omega, self.decisions)])

    def context(self, i: int) -> SegmentContext:
        """Realized per-segment context of segment ``i`` (1-based)."""
        prev_mu = float(self.omega[i - 2] @ self.decisions[i - 2]) if i > 1 else 0.0
        return self._context(i, prev_mu)

    def _context(self, i, prev_mu):
        return SegmentContext(self.omega[i - 1], prev_mu, float(self.buffers_before[i - 1]),
                              float(self.dbar[i - 1]), self.beta)

    def contexts(self) -> list[SegmentContext]:
        prev = np.r_[0.0, self.mus[:-1]]
        return [self._context(i, float(prev[i - 1])) for i in range(1, self.segments + 1)]

    def breakdown(self, params: QoEParams) -> QoEBreakdown:
        return qoe_breakdown(self.omega, self.decisions, self.durations,
                             self.buffers_before, params)

    def total_qoe(self, params: QoEParams) -> float:
        return self.breakdown(params).total


def _check_decision(r, ladder: BitrateLadder, K: int, i: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (K,):
        raise InvalidDecision(f"segment {i}: expected {K} bitrates, got shape {r.shape}")
    if ladder.convex:
        if not ladder.in_hull(r, tol=1e-9):
            raise InvalidDecision(f"segment {i}: {r} outside [{ladder.r_min}, {ladder.r_max}]")
        return ladder.clip(r)
    try:
        return ladder.at(np.atleast_1d(ladder.level_of(r)))
    except InvalidArgument:
        raise InvalidDecision(f"segment {i}: {r} not on the ladder {ladder.levels}") from None


def run_session(policy: Policy, capacity: CapacityTrace, omega: OverlapMap,
                video: VideoConfig, ladder: BitrateLadder, *,
                reveal: str = "playback", wrap: bool = True) -> SessionLog:
    """Simulate segments 1..I under ``policy``.

    Before decision i the policy receives the realizations of every segment
    revealed since the previous decision. With ``reveal="playback"`` a
    segment is revealed when its playback ends; ``reveal="download"``
    reveals it when its last tile arrives.
    """
    if reveal not in ("playback", "download"):
        raise InvalidArgument(f"unknown reveal mode {reveal!r}")
    I, K, beta = video.segment_count, omega.tiles, video.segment_length
    if omega.segments < I:
        raise InvalidArgument(f"overlap map covers {omega.segments} segments, need {I}")
    W = np.asarray(omega.omega[:I])

    decisions = np.zeros((I, K))
    tile_start = np.zeros((I, K))
    tile_finish = np.zeros((I, K))
    dbar = np.zeros(I)
    buffers = np.zeros(I)
    buffers_before = np.zeros(I)
    play_start = np.zeros(I)
    play_end = np.zeros(I)
    rebuffer = np.zeros(I)
    reveal_times = np.zeros(I)
    mus = np.zeros(I)

    t, buf, last_play_end = 0.0, video.initial_buffer, video.initial_buffer
    next_reveal = 0  # segments 1..next_reveal already handed to the policy
    for i in range(1, I + 1):
        revealed = []
        # reveal times are nondecreasing in segment index
        while next_reveal < i - 1 and reveal_times[next_reveal] <= t:
            j = next_reveal + 1
            ctx = SegmentContext(W[j - 1], float(mus[j - 2]) if j > 1 else 0.0,
                                 float(buffers_before[j - 1]), float(dbar[j - 1]), beta)
            revealed.append(Realization(j, decisions[j - 1].copy(), ctx))
            next_reveal += 1

        r = _check_decision(policy.decide(i, revealed), ladder, K, i)
        rec, new_buf = step_download(r, capacity, t, buf, beta, wrap)
        start, end, stall = playback_update(last_play_end, rec.finishes[-1], beta)

        n = i - 1
        decisions[n] = r
        tile_start[n] = rec.starts
        tile_finish[n] = rec.finishes
        dbar[n] = rec.dbar(r, beta)
        buffers_before[n] = buf
        buffers[n] = new_buf
        play_start[n], play_end[n], rebuffer[n] = start, end, stall
        reveal_times[n] = end if reveal == "playback" else rec.finishes[-1]
        mus[n] = float(W[n] @ r)

        t, buf, last_play_end = rec.finishes[-1], new_buf, end

    sets, tilde = auxiliary_sets(tile_start[:, 0], reveal_times)
    return SessionLog(decisions, W.copy(), tile_start, tile_finish, dbar, buffers,
                      buffers_before, play_start, play_end, rebuffer, reveal_times,
                      tuple(sets), tilde, beta, video.initial_buffer)


class ScriptedPolicy:
    """Replays a fixed decision sequence (testing and offline replay)."""

    def __init__(self, decisions):
        self.decisions = np.asarray(decisions, dtype=float)
        self.seen: list[list[int]] = []

    def decide(self, i, revealed):
        self.seen.append([rz.index for rz in revealed])
        return self.decisions[i - 1]
