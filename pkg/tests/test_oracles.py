import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from obs360lab.errors import InstanceTooLarge
from obs360lab.model import BitrateLadder, CapacityTrace, OverlapMap, VideoConfig
from obs360lab.oracles import (BoundConstants, bound_constants, condition_stats, drift_statistics,
                               dynamic_regret, exhaustive_optimum, hull_optimum, offline_optimal,
                               per_segment_optimum, pg_round_optimum, regret_bound)
from obs360lab.policy import OBS360
from obs360lab.qoe import QoEParams, SegmentContext, per_segment_qoe
from obs360lab.sim import ScriptedPolicy, run_session

LADDER = BitrateLadder((1, 2.5, 5, 8, 16, 40))
PARAMS = QoEParams()


# -- per-segment optimum ------------------------------------------------------

def test_single_tile_two_levels():
    ctx = SegmentContext([1.0], prev_mu=3.0, buffer_before=1.0, dbar=10.0)
    ladder = BitrateLadder((1, 5))
    opt = per_segment_optimum(ctx, PARAMS, ladder)
    assert opt.r.tolist() == [5.0]
    gap = per_segment_qoe([5.0], ctx, PARAMS) - per_segment_qoe([1.0], ctx, PARAMS)
    assert gap == pytest.approx(4 * (1 + 0.1 - 0.5 / 10))


def test_rebuffer_dominated_picks_lowest():
    ctx = SegmentContext([0.6, 0.4, 0.0], prev_mu=0, buffer_before=0, dbar=0.2)
    p = QoEParams(l_rb=1.0, l_bd_e=0.1, l_bd_a=0.0)
    for method in ("exhaustive", "pg-round"):
        assert per_segment_optimum(ctx, p, LADDER, method).r.tolist() == [1.0, 1.0, 1.0]


def _random_context(rng, K):
    omega = rng.dirichlet(np.ones(K)) * rng.uniform(0.3, 1.0)
    if rng.random() < 0.2:
        omega[rng.integers(K)] = 0.0
    params = QoEParams(*rng.uniform(0, 1, 3), utility=str(rng.choice(["linear", "log"])),
                       utility_scale=float(rng.uniform(0.5, 5)))
    ctx = SegmentContext(omega, rng.uniform(0, 40), rng.uniform(0, 5), rng.uniform(1, 60))
    return ctx, params


def test_pg_round_matches_exhaustive_small():
    rng = np.random.default_rng(1)
    for _ in range(60):
        K = int(rng.integers(1, 4))
        L = int(rng.integers(2, 5))
        ladder = BitrateLadder(tuple(np.sort(rng.choice(np.arange(1, 41), L, replace=False)).astype(float)))
        ctx, params = _random_context(rng, K)
        exact = exhaustive_optimum(ctx, params, ladder)
        approx = pg_round_optimum(ctx, params, ladder)
        assert approx.value == pytest.approx(exact.value, rel=1e-12, abs=1e-12)


def test_pg_round_on_sixteen_tiles_is_locally_optimal():
    rng = np.random.default_rng(2)
    ladder = BitrateLadder((0.25, 0.625, 1.25, 2, 4, 10))
    ctx, params = _random_context(rng, 16)
    sol = pg_round_optimum(ctx, params, ladder)
    assert ladder.feasible(sol.r)
    for k, lv in itertools.product(range(16), ladder.levels):
        r = sol.r.copy()
        r[k] = lv
        assert per_segment_qoe(r, ctx, params) <= sol.value + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_exhaustive_dominates_every_ladder_point(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 4))
    ctx, params = _random_context(rng, K)
    opt = exhaustive_optimum(ctx, params, LADDER)
    grid = np.array(list(itertools.product(LADDER.levels, repeat=K)))
    assert np.all(per_segment_qoe(grid, ctx, params) <= opt.value + 1e-12 * max(1.0, abs(opt.value)))


def test_hull_optimum_matches_linear_program_and_grid():
    rng = np.random.default_rng(4)
    lo, hi = LADDER.r_min, LADDER.r_max
    convex = BitrateLadder(LADDER.levels, convex=True)
    for _ in range(30):
        K = int(rng.integers(1, 4))
        ctx, params = _random_context(rng, K)
        sol = hull_optimum(ctx, params, convex)
        assert np.all((sol.r >= lo - 1e-9) & (sol.r <= hi + 1e-9))
        # no point of a dense grid beats it
        axis = np.linspace(lo, hi, 40 if K < 3 else 16)
        grid = np.array(list(itertools.product(axis, repeat=K)))
        assert per_segment_qoe(grid, ctx, params).max() <= sol.value + 1e-9
        if params.utility == "linear":
            # independent lifted LP: max c.r - l_a w.s with s_k >= mean - r_k
            w, total = ctx.omega, ctx.omega.sum()
            rb = params.l_rb * ctx.beta / ctx.dbar
            c = np.concatenate([(1 + params.l_bd_e) * w - rb, -params.l_bd_a * w])
            A = np.hstack([(np.outer(np.ones(K), w / total) if total > 0 else np.zeros((K, K)))
                           - np.eye(K), -np.eye(K)])
            res = optimize.linprog(-c, A_ub=A, b_ub=np.zeros(K),
                                   bounds=[(lo, hi)] * K + [(0, None)] * K, method="highs")
            const = params.l_rb * ctx.buffer_before - params.l_bd_e * ctx.prev_mu
            assert sol.value == pytest.approx(-res.fun + const, abs=1e-7)


def test_convex_ladder_uses_hull():
    ctx = SegmentContext([0.9, 0.1], prev_mu=3, buffer_before=1, dbar=30)
    convex = BitrateLadder(LADDER.levels, convex=True)
    sol = per_segment_optimum(ctx, PARAMS, convex)
    # both tiles profitable at this capacity: the corner (40, 40)
    assert sol.r == pytest.approx([40.0, 40.0])


# -- offline optimum ----------------------------------------------------------

def _pieces_finish(times, rates, t, bits):
    """Step through constant-capacity pieces until ``bits`` are delivered."""
    edges = list(times) + [math.inf]
    j = max(n for n in range(len(times)) if times[n] <= t)
    while True:
        room = (edges[j + 1] - t) * rates[j]
        if bits <= room:
            return t + bits / rates[j]
        bits -= room
        t = edges[j + 1]
        j += 1


def _hand_qoe(times, rates, decisions, omega, b_ini, params, beta=1.0):
    t, buf, prev_mu, total = 0.0, b_ini, None, 0.0
    for r, w in zip(decisions, omega):
        start = t
        for rate in r:
            t = _pieces_finish(times, rates, t, rate * beta)
        dur = t - start
        mu = sum(a * b for a, b in zip(w, r))
        mean = mu / sum(w)
        spread = sum(wk * max(mean - rk, 0.0) for wk, rk in zip(w, r))
        total += mu - params.l_rb * max(dur - buf, 0.0) - params.l_bd_a * spread
        if prev_mu is not None:
            total -= params.l_bd_e * max(prev_mu - mu, 0.0)
        buf = max(buf - dur, 0.0) + beta
        prev_mu = mu
    return total


def test_offline_two_segments_sixteen_way_enumeration():
    times, rates = [0.0, 1.0, 2.0], [6.0, 3.0, 12.0]
    capacity = CapacityTrace(times, rates, duration=1000)
    omega = [[0.8, 0.2], [0.3, 0.7]]
    ladder = BitrateLadder((2, 8))
    video = VideoConfig(2, 1.0, 1.0)
    seqs = list(itertools.product(itertools.product(ladder.levels, repeat=2), repeat=2))
    assert len(seqs) == 16
    values = [_hand_qoe(times, rates, s, omega, 1.0, PARAMS) for s in seqs]
    best = offline_optimal(capacity, OverlapMap(np.array(omega)), video, ladder, PARAMS)
    assert best.qoe == pytest.approx(max(values), abs=1e-12)
    assert [tuple(r) for r in best.decisions] == [tuple(map(float, r)) for r in seqs[int(np.argmax(values))]]


def test_offline_single_segment_single_tile():
    capacity = CapacityTrace.constant(4.0)
    video = VideoConfig(1, 1.0, 2.0)
    omega = OverlapMap(np.array([[1.0]]))
    best = offline_optimal(capacity, omega, video, LADDER, PARAMS)
    vals = [run_session(ScriptedPolicy([[r]]), capacity, omega, video, LADDER).total_qoe(PARAMS)
            for r in LADDER.levels]
    assert best.qoe == pytest.approx(max(vals), abs=1e-12)
    assert best.decisions[0, 0] == LADDER.levels[int(np.argmax(vals))]


def _tiny_instance(seed, I=4):
    rng = np.random.default_rng(seed)
    capacity = CapacityTrace(np.arange(20.0), rng.uniform(3, 30, 20))
    omega = OverlapMap(rng.dirichlet([1, 1], size=I))
    return capacity, omega, VideoConfig(I, 1.0, float(rng.uniform(0, 3)))


@pytest.mark.parametrize("seed", range(4))
def test_offline_dominates_policies_and_matches_its_replay(seed):
    capacity, omega, video = _tiny_instance(seed)
    ladder = BitrateLadder((1, 5, 16))
    best = offline_optimal(capacity, omega, video, ladder, PARAMS)
    assert best.qoe == pytest.approx(best.log.total_qoe(PARAMS), abs=1e-9)
    rng = np.random.default_rng(seed + 100)
    for _ in range(20):
        d = rng.choice(ladder.array, size=(video.segment_count, 2))
        q = run_session(ScriptedPolicy(d), capacity, omega, video, ladder).total_qoe(PARAMS)
        assert q <= best.qoe + 1e-9
    obs = run_session(OBS360(ladder, PARAMS, 2, alpha=10.0), capacity, omega, video, ladder)
    assert obs.total_qoe(PARAMS) <= best.qoe + 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_offline_monotone_in_ladder(seed):
    capacity, omega, video = _tiny_instance(seed, I=3)
    small = offline_optimal(capacity, omega, video, BitrateLadder((1, 16)), PARAMS).qoe
    large = offline_optimal(capacity, omega, video, BitrateLadder((1, 5, 16)), PARAMS).qoe
    assert large >= small - 1e-12


def test_offline_rejects_large_instances():
    capacity, omega, video = _tiny_instance(0, I=8)
    with pytest.raises(InstanceTooLarge):
        offline_optimal(capacity, omega, video, LADDER, PARAMS)


# -- regret -------------------------------------------------------------------

class Clairvoyant:
    """Plays each segment's per-segment optimum; valid when capacity is
    constant, so the context does not depend on the decision."""

    def __init__(self, omega, dbar):
        self.omega, self.dbar = omega, dbar

    def decide(self, i, revealed):
        ctx = SegmentContext(self.omega[i - 1], 0.0, 0.0, self.dbar)
        return per_segment_optimum(ctx, PARAMS, LADDER).r


def test_clairvoyant_has_zero_regret():
    rng = np.random.default_rng(8)
    I = 12
    omega = OverlapMap(rng.dirichlet([1, 1, 1], size=I))
    log = run_session(Clairvoyant(omega.omega, 12.0), CapacityTrace.constant(12.0), omega,
                      VideoConfig(I), LADDER)
    report = dynamic_regret(log, PARAMS, LADDER)
    assert report.total == pytest.approx(0.0, abs=1e-9)


def test_constant_policy_regret_is_linear():
    I = 10
    omega = OverlapMap(np.tile([0.9, 0.1], (I, 1)))
    log = run_session(ScriptedPolicy([[5, 5]] * I), CapacityTrace.constant(20.0), omega,
                      VideoConfig(I), LADDER)
    report = dynamic_regret(log, PARAMS, LADDER)
    ctx = SegmentContext([0.9, 0.1], 0.0, 0.0, 20.0)
    gap = exhaustive_optimum(ctx, PARAMS, LADDER).value - per_segment_qoe([5, 5], ctx, PARAMS)
    assert report.summands == pytest.approx(np.full(I, gap), abs=1e-9)
    assert report.prefix[-1] == pytest.approx(I * gap)
    assert report.per_segment == pytest.approx(gap)


def test_regret_summands_nonnegative_with_exact_oracle():
    rng = np.random.default_rng(3)
    I = 25
    capacity = CapacityTrace(np.arange(60.0), rng.uniform(5, 60, 60))
    omega = OverlapMap(rng.dirichlet([1, 1], size=I))
    log = run_session(OBS360(LADDER, PARAMS, 2, alpha=15.0), capacity, omega, VideoConfig(I), LADDER)
    report = dynamic_regret(log, PARAMS, LADDER, method="exhaustive")
    assert np.all(report.summands >= -1e-12)


# -- condition statistics -----------------------------------------------------

def test_drift_statistics_hand_example():
    # I = 5; sets for decisions 1..6: {}, {}, {1}, {2}, {}, {3, 4, 5}
    sets = ((), (), (1,), (2,), (), (3, 4, 5))
    decisions = np.zeros((5, 2))
    grads = np.tile([1.0, 0.0], (5, 1))
    optima = np.array([[9, 9], [1, 1], [2, 0], [4, 5], [3, 0]], dtype=float)
    stats = drift_statistics(sets, grads, optima, decisions, 5)
    # J: decision 3 -> 1, decision 4 -> 2, decision 5 inherits 2, decision 6
    # picks 4 (largest first optimum coordinate); J-dagger of 6 is J_4 = 2
    assert stats.J.tolist() == [0, 0, 1, 2, 2, 4]
    assert stats.J_dagger.tolist() == [0, 0, 0, 0, 0, 2]
    assert stats.v_empty == 2
    assert stats.v_r == pytest.approx(3 * 5.0)
    assert not stats.has_tail


def test_one_step_feedback_has_no_empty_sets():
    I = 6
    omega = OverlapMap(np.tile([0.5, 0.5], (I, 1)))
    log = run_session(ScriptedPolicy([[5, 5]] * I), CapacityTrace.constant(10.0), omega, VideoConfig(I),
                      LADDER, reveal="download")
    stats = condition_stats(log, PARAMS, LADDER)
    assert stats.v_empty == 0
    # stationary context: every per-segment optimum coincides
    assert stats.v_r == 0


# -- bound --------------------------------------------------------------------

def test_regret_bound_examples():
    consts = BoundConstants(radius=10.0, q_bar=2.0, tiles=2, r_max=40.0, d_min=5.0, alpha=0.5)
    assert regret_bound(0, 0, consts, 100) == pytest.approx(100 / 1.0 + 0.5 * 4 * 100 / 2)
    full = regret_bound(3, 7, consts, 100, has_tail=True)
    expected = (100 * 4 / 1.0 + 10 * 7 / 0.5 + 0.5 * 4 * 100 / 2
                + 2 * 40 / 5 * (3 * 100 / 1.0 + 0.5 * 4 / 2))
    assert full == pytest.approx(expected)
    doubled = BoundConstants(10.0, 2.0, 2, 40.0, 5.0, 1.0)
    assert regret_bound(0, 0, doubled, 100) == pytest.approx(100 / 2 + 4 * 100 / 2)


def test_bound_constants():
    c = bound_constants(LADDER, PARAMS, tiles=2, beta=1.0, d_min=5.0, alpha=1.0, max_overlap_sum=1.0)
    assert c.radius == pytest.approx(math.sqrt(2) * 39)
    assert c.q_bar == pytest.approx((1 + 0.1 + 0.2 + 0.1) * math.sqrt(2))


def test_horizon_schedule_makes_bound_per_segment_vanish():
    consts = bound_constants(LADDER, PARAMS, 2, 1.0, 5.0, 1.0, 1.0)
    per_segment = []
    for I in (10**2, 10**3, 10**4, 10**5, 10**6):
        alpha = 10.0 * I ** -0.5
        c = BoundConstants(consts.radius, consts.q_bar, 2, 40.0, 5.0, alpha)
        # sublinear feedback gaps and drift, no tail
        per_segment.append(regret_bound(I ** 0.25, I ** 0.25, c, I) / I)
    assert all(b < a for a, b in zip(per_segment, per_segment[1:]))
    # the slowest term decays like I^(-1/4): four decades shrink it tenfold
    assert per_segment[-1] < per_segment[0] / 10
