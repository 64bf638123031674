"""Trace-driven laboratory for online bitrate selection in tiled 360-degree video."""

from .model import (BitrateLadder, CapacityTrace, OverlapMap, TileGrid, VideoConfig,
                    ViewportTrace, ladder_nearest, overlap_fractions, tile_index)
from .oracles import (compute_J, condition_stats, dynamic_regret, offline_optimal,
                      per_segment_optimum, regret_bound)
from .policy import OBS360, ConstantPolicy, GreedyCapacityPolicy, make_policy, ogd_update, rate_limit
from .qoe import QoEParams, SegmentContext, per_segment_qoe, per_segment_subgradient, total_qoe
from .sim import SessionLog, run_session

__version__ = "0.1.0"
