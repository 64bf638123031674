"""Glue between a RunConfig and the simulator, oracles and report files."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .model import BitrateLadder, CapacityTrace, OverlapMap, TileGrid, VideoConfig, overlap_fractions
from .oracles import (RegretReport, bound_constants, condition_stats, dynamic_regret,
                      offline_optimal, regret_bound)
from .policy import horizon_alpha, make_policy
from .qoe import QoEParams
from .sim import SessionLog, run_session
from .traces import generate_synthetic, read_capacity, read_viewport


@dataclass(frozen=True)
class Scenario:
    capacity: CapacityTrace
    omega: OverlapMap
    video: VideoConfig
    ladder: BitrateLadder
    params: QoEParams


def build_scenario(cfg: RunConfig) -> Scenario:
    grid = TileGrid(cfg.grid_rows, cfg.grid_cols)
    synthetic = None
    if cfg.capacity_trace is None or cfg.user_trace is None:
        synthetic = generate_synthetic(cfg.synthetic, cfg.seed, cfg.segments, cfg.extent)
    if cfg.capacity_trace is not None:
        capacity = read_capacity(cfg.capacity_trace, cfg.d_min, cfg.d_max)
    else:
        capacity = synthetic[0]
    if cfg.user_trace is not None:
        user = read_viewport(cfg.user_trace, cfg.extent)
        reference = read_viewport(cfg.reference_trace, cfg.extent)
    else:
        user, reference = synthetic[1], synthetic[2]
    omega = overlap_fractions(user, reference, grid)
    video = VideoConfig(cfg.segments, cfg.segment_length, cfg.initial_buffer)
    ladder = BitrateLadder(cfg.ladder, convex=cfg.mode == "convex")
    params = QoEParams(cfg.l_rb, cfg.l_bd_e, cfg.l_bd_a, cfg.utility, cfg.utility_scale)
    return Scenario(capacity, omega, video, ladder, params)


def step_size(cfg: RunConfig) -> float:
    if cfg.alpha_schedule == "horizon":
        return horizon_alpha(cfg.alpha0, cfg.segments, cfg.gamma)
    return cfg.alpha


def run_policy(cfg: RunConfig, name: str | None = None, scenario: Scenario | None = None) -> SessionLog:
    sc = scenario or build_scenario(cfg)
    policy = make_policy(name or cfg.policy, sc.ladder, sc.params, sc.omega.tiles,
                         alpha=step_size(cfg), r0=cfg.r0, method=cfg.optimum_method)
    return run_session(policy, sc.capacity, sc.omega, sc.video, sc.ladder,
                       reveal=cfg.reveal, wrap=cfg.on_exhaustion == "wrap")


def analyse(log: SessionLog, cfg: RunConfig, sc: Scenario):
    """Summary dict and regret report of one session."""
    report = dynamic_regret(log, sc.params, sc.ladder, cfg.optimum_method)
    stats = condition_stats(log, sc.params, sc.ladder, optima=report.optima)
    consts = bound_constants(sc.ladder, sc.params, log.tiles, log.beta, sc.capacity.d_min,
                             step_size(cfg), float(log.omega.sum(axis=1).max()))
    bound = regret_bound(stats.v_empty, stats.v_r, consts, log.segments, stats.has_tail)
    bd = log.breakdown(sc.params)
    summary = {
        "segments": log.segments,
        "tiles": log.tiles,
        "qoe": bd.total,
        "utility": bd.utility,
        "rebuffer_loss": bd.rebuffer,
        "inter_degradation_loss": bd.inter,
        "intra_degradation_loss": bd.intra,
        "mean_viewing_bitrate": float(log.mus.mean()),
        "total_rebuffer_s": float(log.rebuffer.sum()),
        "mean_rebuffer_per_segment_s": float(log.rebuffer.mean()),
        "regret": report.total,
        "regret_per_segment": report.per_segment,
        "v_empty": stats.v_empty,
        "v_r": stats.v_r,
        "has_tail": stats.has_tail,
        "alpha": consts.alpha,
        "radius": consts.radius,
        "q_bar": consts.q_bar,
        "regret_bound": bound,
    }
    return summary, report, stats


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.12g}") if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def dump_json(obj) -> str:
    return json.dumps(_num(obj), indent=2, sort_keys=True) + "\n"


def session_csv(log: SessionLog) -> str:
    """Per-segment rows; floats written with full precision."""
    K = log.tiles
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", *[f"r_{k}" for k in range(1, K + 1)], *[f"omega_{k}" for k in range(1, K + 1)],
                "mu", "b", "b_before", "rebuffer", "tau_start", "tau_finish", "dbar",
                "play_start", "play_end", "revealed_at"])
    mus = log.mus
    for n in range(log.segments):
        w.writerow([n + 1, *map(repr, map(float, log.decisions[n])),
                    *map(repr, map(float, log.omega[n])),
                    repr(float(mus[n])), repr(float(log.buffers[n])),
                    repr(float(log.buffers_before[n])), repr(float(log.rebuffer[n])),
                    repr(float(log.tile_start[n, 0])), repr(float(log.tile_finish[n, -1])),
                    repr(float(log.dbar[n])), repr(float(log.play_start[n])),
                    repr(float(log.play_end[n])), int(log.tilde[n]) + 1])
    return buf.getvalue()


def regret_csv(log: SessionLog, report: RegretReport, stats) -> str:
    K = log.tiles
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", *[f"rstar_{k}" for k in range(1, K + 1)], "q_opt", "q_actual",
                "regret", "cumulative_regret", "aux_set", "J"])
    prefix = report.prefix
    for n in range(log.segments):
        w.writerow([n + 1, *map(repr, map(float, report.optima[n])),
                    repr(float(report.optimal_values[n])), repr(float(report.actual_values[n])),
                    repr(float(report.summands[n])), repr(float(prefix[n])),
                    " ".join(map(str, log.aux_sets[n])), int(stats.J[n])])
    return buf.getvalue()


def write_outputs(out_dir, log: SessionLog, summary: dict, extra: dict | None = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "session.csv").write_text(session_csv(log), encoding="utf-8")
    (out / "summary.json").write_text(dump_json(summary), encoding="utf-8")
    for name, text in (extra or {}).items():
        (out / name).write_text(text, encoding="utf-8")


def simulate(cfg: RunConfig, name: str | None = None):
    """Run one policy; returns (log, summary, regret report, condition stats)."""
    sc = build_scenario(cfg)
    name = name or cfg.policy
    log = run_policy(cfg, name, sc)
    summary, report, stats = analyse(log, cfg, sc)
    summary = {"policy": name, "mode": cfg.mode, **summary}
    return log, summary, report, stats


def _simulate_texts(args):
    cfg, name = args
    log, summary, report, stats = simulate(cfg, name)
    return session_csv(log), summary


def compare(cfg: RunConfig, names=None, jobs: int | None = None):
    """Run several policies on the same scenario, optionally in parallel.

    Returns ``{name: (session_csv_text, summary)}`` in the given order.
    """
    names = list(names or cfg.policies)
    jobs = jobs or cfg.jobs
    tasks = [(cfg, n) for n in names]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_texts, tasks))
    else:
        results = [_simulate_texts(t) for t in tasks]
    return dict(zip(names, results))


def offline_comparison(cfg: RunConfig, limit: int | None = None):
    """Exact offline optimum plus the configured policy on the same instance."""
    sc = build_scenario(cfg)
    kwargs = {} if limit is None else {"limit": limit}
    best = offline_optimal(sc.capacity, sc.omega, sc.video, sc.ladder, sc.params,
                           wrap=cfg.on_exhaustion == "wrap", **kwargs)
    online = run_policy(cfg, scenario=sc)
    opt_bd = best.log.breakdown(sc.params)
    online_bd = online.breakdown(sc.params)
    summary = {
        "policy": cfg.policy,
        "offline_qoe": best.qoe,
        "offline_utility": opt_bd.utility,
        "offline_rebuffer_loss": opt_bd.rebuffer,
        "offline_inter_degradation_loss": opt_bd.inter,
        "offline_intra_degradation_loss": opt_bd.intra,
        "offline_mean_viewing_bitrate": float(best.log.mus.mean()),
        "offline_total_rebuffer_s": float(best.log.rebuffer.sum()),
        "policy_qoe": online_bd.total,
        "policy_mean_viewing_bitrate": float(online.mus.mean()),
        "qoe_ratio": online_bd.total / best.qoe if best.qoe != 0 else None,
    }
    return best, online, summary
