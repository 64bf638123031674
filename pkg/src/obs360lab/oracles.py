"""Ground-truth solvers and regret analysis.

The per-segment objective is concave on the bitrate box, so the discrete
problem is attacked by projected supergradient ascent on the box followed
by rounding and coordinate-wise local search; exhaustive enumeration over
the ladder serves as the exact oracle wherever it fits in memory.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import InstanceTooLarge, InvalidArgument
from .model import BitrateLadder, CapacityTrace, OverlapMap, VideoConfig
from .qoe import (QoEParams, SegmentContext, per_segment_qoe, per_segment_subgradient,
                  subgradient_bound, _intra_spread)
from .sim import ScriptedPolicy, SessionLog, finish_times, run_session

EXHAUSTIVE_LIMIT = 10**6
OFFLINE_LIMIT = 10**7


class SegmentOptimum(NamedTuple):
    r: np.ndarray
    value: float


@lru_cache(maxsize=32)
def _lattice(levels: tuple, K: int) -> np.ndarray:
    """All points of levels^K in lexicographic (low-first) order."""
    grids = np.meshgrid(*([np.asarray(levels)] * K), indexing="ij")
    out = np.stack(grids, axis=-1).reshape(-1, K)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _assignments(K: int) -> np.ndarray:
    """Rows of {0: low bound, 1: high bound, 2: tied to the weighted mean}."""
    out = np.array(list(itertools.product(range(3), repeat=K)), dtype=np.int8)
    out.setflags(write=False)
    return out


def exhaustive_optimum(ctx: SegmentContext, params: QoEParams,
                       ladder: BitrateLadder) -> SegmentOptimum:
    K = ctx.tiles
    if len(ladder) ** K > EXHAUSTIVE_LIMIT:
        raise InstanceTooLarge(f"|R|^K = {len(ladder)}^{K} exceeds {EXHAUSTIVE_LIMIT}")
    pts = _lattice(ladder.levels, K)
    vals = per_segment_qoe(pts, ctx, params)
    r = pts[int(np.argmax(vals))].copy()
    # reported values always come from the single-point evaluation so that
    # different solvers landing on the same vector agree bit for bit
    return SegmentOptimum(r, float(per_segment_qoe(r, ctx, params)))


def _local_search(r, ctx, params, ladder, max_rounds=100):
    levels = ladder.array
    value = float(per_segment_qoe(r, ctx, params))
    for _ in range(max_rounds):
        improved = False
        # single tiles, then every group of tiles sharing a level moved together
        # (the intra-segment term couples tiles sitting at the weighted mean)
        moves = [np.arange(len(r)) == k for k in range(len(r))]
        moves += [r == v for v in np.unique(r) if (r == v).sum() > 1]
        for mask in moves:
            cand = np.repeat(r[None, :], len(levels), axis=0)
            cand[:, mask] = levels[:, None]
            vals = per_segment_qoe(cand, ctx, params)
            j = int(np.argmax(vals))
            if vals[j] > value + 1e-12:
                r, value, improved = cand[j].copy(), float(vals[j]), True
        if not improved:
            break
    return r, value


def pg_round_optimum(ctx: SegmentContext, params: QoEParams, ladder: BitrateLadder,
                     iterations: int = 500, max_enumerated_roundings: int = 1024) -> SegmentOptimum:
    """Supergradient ascent on the box, rounding to adjacent levels, then
    coordinate-wise local search."""
    K = ctx.tiles
    lo, hi = ladder.r_min, ladder.r_max
    q_bar = subgradient_bound(params, K, float(ctx.omega.sum()), ctx.beta, ctx.dbar)
    c = (hi - lo) / q_bar if q_bar > 0 else 0.0

    x = np.full(K, 0.5 * (lo + hi))
    best_x, best_v = x.copy(), float(per_segment_qoe(x, ctx, params))
    for t in range(1, iterations + 1):
        x = np.clip(x + c / math.sqrt(t) * per_segment_subgradient(x, ctx, params), lo, hi)
        v = float(per_segment_qoe(x, ctx, params))
        if v > best_v:
            best_x, best_v = x.copy(), v

    levels = ladder.array
    up = np.clip(np.searchsorted(levels, best_x - 1e-12), 0, len(levels) - 1)
    down = np.clip(up - (levels[up] > best_x + 1e-12), 0, len(levels) - 1)
    if 2 ** K <= max_enumerated_roundings:
        picks = np.array(list(itertools.product((0, 1), repeat=K)), dtype=bool)
        cand = np.where(picks, levels[up], levels[down])
        vals = per_segment_qoe(cand, ctx, params)
        r0 = cand[int(np.argmax(vals))].copy()
    else:
        nearest = np.abs(levels[up] - best_x) < np.abs(levels[down] - best_x)
        r0 = np.where(nearest, levels[up], levels[down])
    r, _ = _local_search(r0, ctx, params, ladder)
    return SegmentOptimum(r, float(per_segment_qoe(r, ctx, params)))


def _hull_vertices(ctx, params, lo, hi):
    """Exact maximizer for linear utility: every vertex of the lifted LP has
    each coordinate at a bound or equal to the common weighted mean."""
    K = ctx.tiles
    A = _assignments(K)
    w = ctx.omega
    bounds = np.where(A == 1, hi, lo).astype(float)
    fixed = A != 2
    w_fixed = (fixed * w).sum(axis=1)
    num = (fixed * w * bounds).sum(axis=1)
    has_tied = ~fixed.all(axis=1)
    ok = ~has_tied | (w_fixed > 0)
    v = np.divide(num, w_fixed, out=np.zeros_like(num), where=w_fixed > 0)
    pts = np.where(fixed, bounds, v[:, None])[ok]
    vals = per_segment_qoe(pts, ctx, params)
    r = pts[int(np.argmax(vals))].copy()
    # reported values always come from the single-point evaluation so that
    # different solvers landing on the same vector agree bit for bit
    return SegmentOptimum(r, float(per_segment_qoe(r, ctx, params)))


def _hull_lifted(ctx, params, lo, hi):
    """Lifted formulation with s_k >= mean - r_k, s_k >= 0."""
    K = ctx.tiles
    w = ctx.omega
    total = w.sum()
    rb = params.l_rb * ctx.beta / ctx.dbar
    A = np.zeros((K, 2 * K))
    if total > 0:
        A[:, :K] = np.outer(np.ones(K), w / total) - np.eye(K)
    A[:, K:] = -np.eye(K)
    var_bounds = [(lo, hi)] * K + [(0, None)] * K
    if params.utility == "linear":
        c = np.concatenate([(1 + params.l_bd_e) * w - rb, -params.l_bd_a * w])
        res = optimize.linprog(-c, A_ub=A, b_ub=np.zeros(K), bounds=var_bounds, method="highs")
        x = res.x
    else:
        def neg(z):
            r, s = z[:K], z[K:]
            mu = w @ r
            return -(params.u(mu) + params.l_bd_e * mu - rb * r.sum() - params.l_bd_a * w @ s)

        def neg_grad(z):
            mu = w @ z[:K]
            g = np.concatenate([(params.du(mu) + params.l_bd_e) * w - rb, -params.l_bd_a * w])
            return -g

        z0 = np.concatenate([np.full(K, 0.5 * (lo + hi)), np.zeros(K)])
        cons = [{"type": "ineq", "fun": lambda z: -(A @ z), "jac": lambda z: -A}]
        res = optimize.minimize(neg, z0, jac=neg_grad, bounds=var_bounds, constraints=cons,
                                method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
        x = res.x
    r = np.clip(x[:K], lo, hi)
    return SegmentOptimum(r, float(per_segment_qoe(r, ctx, params)))


def hull_optimum(ctx: SegmentContext, params: QoEParams, ladder: BitrateLadder) -> SegmentOptimum:
    """Maximizer of the per-segment objective over the box [R_1, R_|R|]^K."""
    if params.utility == "linear" and ctx.tiles <= 8:
        return _hull_vertices(ctx, params, ladder.r_min, ladder.r_max)
    return _hull_lifted(ctx, params, ladder.r_min, ladder.r_max)


def per_segment_optimum(ctx: SegmentContext, params: QoEParams, ladder: BitrateLadder,
                        method: str = "auto") -> SegmentOptimum:
    """Solve the per-segment problem for a realized context.

    On a convex ladder the box is the feasible set. Otherwise ``method`` is
    ``"exhaustive"``, ``"pg-round"`` or ``"auto"`` (exhaustive when
    |R|^K <= 10^6).
    """
    if ladder.convex:
        return hull_optimum(ctx, params, ladder)
    if method == "auto":
        method = "exhaustive" if len(ladder) ** ctx.tiles <= EXHAUSTIVE_LIMIT else "pg-round"
    if method == "exhaustive":
        return exhaustive_optimum(ctx, params, ladder)
    if method == "pg-round":
        return pg_round_optimum(ctx, params, ladder)
    raise InvalidArgument(f"unknown method {method!r}")


# --- offline optimum ------------------------------------------------------

@dataclass(frozen=True)
class OfflineResult:
    decisions: np.ndarray
    qoe: float
    log: SessionLog


def offline_optimal(capacity: CapacityTrace, omega: OverlapMap, video: VideoConfig,
                    ladder: BitrateLadder, params: QoEParams, *, wrap: bool = True,
                    limit: int = OFFLINE_LIMIT) -> OfflineResult:
    """Best decision sequence for the full session by exhaustive enumeration.

    All |R|^(K*I) sequences are simulated layer by layer (the same download,
    buffer and playback recurrences as ``run_session``, vectorized over
    prefixes). Only tiny instances are accepted.
    """
    I, K, beta = video.segment_count, omega.tiles, video.segment_length
    n_seq = len(ladder) ** (K * I)
    if n_seq > limit:
        raise InstanceTooLarge(f"|R|^(K*I) = {len(ladder)}^{K * I} exceeds {limit}")
    choices = np.asarray(_lattice(ladder.levels, K))
    C = len(choices)
    W = omega.omega

    t = np.zeros(1)
    buf = np.full(1, video.initial_buffer)
    prev_mu = np.zeros(1)
    acc = np.zeros(1)
    for i in range(I):
        w = W[i]
        mu_c = choices @ w
        gain_c = params.u(mu_c) - params.l_bd_a * _intra_spread(w, choices)
        start = np.repeat(t, C)
        tt = start
        for k in range(K):
            tt = finish_times(capacity, tt, np.tile(choices[:, k], len(t)) * beta, wrap)
        dur = tt - start
        b_rep = np.repeat(buf, C)
        stall = np.maximum(dur - b_rep, 0.0)
        mu = np.tile(mu_c, len(t))
        step = np.tile(gain_c, len(t)) - params.l_rb * stall
        if i > 0:
            step = step - params.l_bd_e * np.maximum(np.repeat(prev_mu, C) - mu, 0.0)
        acc = np.repeat(acc, C) + step
        buf = np.maximum(b_rep - dur, 0.0) + beta
        t, prev_mu = tt, mu

    best = int(np.argmax(acc))
    digits = []
    for _ in range(I):
        best, c = divmod(best, C)
        digits.append(c)
    decisions = choices[digits[::-1]].copy()
    log = run_session(ScriptedPolicy(decisions), capacity, omega, video, ladder, wrap=wrap)
    return OfflineResult(decisions, log.total_qoe(params), log)


# --- regret ---------------------------------------------------------------

@dataclass(frozen=True)
class RegretReport:
    optimal_values: np.ndarray   # Q_i(r*_i)
    actual_values: np.ndarray    # Q_i(r^o_i)
    optima: np.ndarray           # (I, K) r*_i

    @property
    def summands(self) -> np.ndarray:
        return self.optimal_values - self.actual_values

    @property
    def prefix(self) -> np.ndarray:
        return np.cumsum(self.summands)

    @property
    def total(self) -> float:
        return float(self.summands.sum())

    @property
    def per_segment(self) -> float:
        return self.total / len(self.summands)


def segment_optima(log: SessionLog, params: QoEParams, ladder: BitrateLadder,
                   method: str = "auto"):
    """(optima, optimal values) for every segment of a finished session."""
    sols = [per_segment_optimum(ctx, params, ladder, method) for ctx in log.contexts()]
    return np.array([s.r for s in sols]), np.array([s.value for s in sols])


def dynamic_regret(log: SessionLog, params: QoEParams, ladder: BitrateLadder,
                   method: str = "auto") -> RegretReport:
    """Per-segment optimum minus the value of the decision actually played,
    both evaluated in the realized context of the session."""
    optima, best = segment_optima(log, params, ladder, method)
    actual = np.array([float(per_segment_qoe(r, ctx, params))
                       for r, ctx in zip(log.decisions, log.contexts())])
    return RegretReport(best, actual, optima)


def compute_J(members, grads, optima, decisions) -> int:
    """Member j minimizing -g_j . (r*_j - r^o_j); ties go to the smallest index.

    ``grads``, ``optima`` and ``decisions`` are mappings (or arrays indexed
    by j-1 when given as arrays) from segment index to vectors.
    """
    members = sorted(members)
    if not members:
        raise InvalidArgument("empty set: fall back to the previous decision")

    def get(src, j):
        return src[j] if isinstance(src, dict) else src[j - 1]

    best_j, best_v = None, np.inf
    for j in members:
        v = -float(np.dot(get(grads, j), get(optima, j) - get(decisions, j)))
        if v < best_v:
            best_j, best_v = j, v
    return best_j


@dataclass(frozen=True)
class ConditionStats:
    v_empty: int
    v_r: float
    J: np.ndarray         # J[i-1] for i = 1..I+1; 0 when undefined
    J_dagger: np.ndarray  # 0 when undefined
    h: np.ndarray         # last earlier decision with a nonempty set; 0 when none
    has_tail: bool        # some segment never lands in any auxiliary set


def drift_statistics(aux_sets, grads, optima, decisions, segments: int) -> ConditionStats:
    """Condition statistics from auxiliary sets and per-segment vectors.

    ``aux_sets[i-1]`` is the set revealed at decision i = 1..I+1; the
    arrays are indexed by segment-1. Decision 1 always starts from the
    initial vector, so it is not counted as an empty set. For an empty set,
    J_i is inherited from the last earlier decision with a nonempty set.
    Pairs whose J_i or J_i-dagger is undefined (decisions still chained to
    the initial vector) contribute nothing to the drift sum.
    """
    n = len(aux_sets)
    J = np.zeros(n, dtype=int)
    h = np.zeros(n, dtype=int)
    last = 0
    for i in range(1, n + 1):
        members = aux_sets[i - 1]
        h[i - 1] = last
        if members:
            J[i - 1] = compute_J(members, grads, optima, decisions)
            last = i
        elif last:
            J[i - 1] = J[last - 1]
    J_dag = np.array([J[j - 1] if j else 0 for j in J], dtype=int)
    v_r = 0.0
    for i in range(1, n + 1):
        size = len(aux_sets[i - 1])
        if size and J[i - 1] and J_dag[i - 1]:
            v_r += size * float(np.linalg.norm(optima[J[i - 1] - 1] - optima[J_dag[i - 1] - 1]))
    covered = {j for s in aux_sets for j in s}
    return ConditionStats(
        v_empty=sum(1 for s in aux_sets[1:] if not s),
        v_r=v_r,
        J=J,
        J_dagger=J_dag,
        h=h,
        has_tail=len(covered) < segments,
    )


def condition_stats(log: SessionLog, params: QoEParams, ladder: BitrateLadder,
                    optima=None, method: str = "auto") -> ConditionStats:
    """Feedback-gap count and optimum-drift statistic of a finished session."""
    if optima is None:
        optima, _ = segment_optima(log, params, ladder, method)
    grads = np.array([per_segment_subgradient(r, c, params)
                      for r, c in zip(log.decisions, log.contexts())])
    return drift_statistics(log.aux_sets, grads, optima, log.decisions, log.segments)


@dataclass(frozen=True)
class BoundConstants:
    radius: float   # diameter of the decision box
    q_bar: float    # bound on supergradient norms
    tiles: int
    r_max: float
    d_min: float
    alpha: float


def bound_constants(ladder: BitrateLadder, params: QoEParams, tiles: int, beta: float,
                    d_min: float, alpha: float, max_overlap_sum: float) -> BoundConstants:
    radius = math.sqrt(tiles) * (ladder.r_max - ladder.r_min)
    q_bar = subgradient_bound(params, tiles, max_overlap_sum, beta, d_min)
    return BoundConstants(radius, q_bar, tiles, ladder.r_max, d_min, alpha)


def regret_bound(v_empty: float, v_r: float, consts: BoundConstants, segments: int,
                 has_tail: bool = False) -> float:
    R, Q, a = consts.radius, consts.q_bar, consts.alpha
    if a <= 0:
        raise InvalidArgument("alpha must be positive")
    value = R**2 * (1 + v_empty) / (2 * a) + R * v_r / a + a * Q**2 * segments / 2
    if has_tail:
        value += consts.tiles * consts.r_max / consts.d_min * (3 * R**2 / (2 * a) + a * Q**2 / 2)
    return value
