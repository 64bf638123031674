"""Viewing bitrate, utility, losses and the per-segment objective.

Units: bitrates in Mbps, times in seconds, QoE in dimensionless utils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class QoEParams:
    """Loss coefficients and the utility shape.

    ``utility`` is ``"linear"`` (u(mu) = mu) or ``"log"``
    (u(mu) = utility_scale * ln(1 + mu)).
    """

    l_rb: float = 0.5
    l_bd_e: float = 0.1
    l_bd_a: float = 0.1
    utility: str = "linear"
    utility_scale: float = 1.0

    def __post_init__(self):
        if min(self.l_rb, self.l_bd_e, self.l_bd_a) < 0:
            raise InvalidArgument("loss coefficients must be nonnegative")
        if self.utility not in ("linear", "log"):
            raise InvalidArgument(f"unknown utility kind {self.utility!r}")
        if self.utility_scale < 0:
            raise InvalidArgument("utility scale must be nonnegative")

    def u(self, mu):
        if self.utility == "linear":
            return mu
        return self.utility_scale * np.log1p(mu)

    def du(self, mu):
        """Derivative of the utility."""
        if self.utility == "linear":
            return np.ones_like(mu) if isinstance(mu, np.ndarray) else 1.0
        return self.utility_scale / (1.0 + mu)


@dataclass(frozen=True)
class SegmentContext:
    """Realized quantities conditioning the per-segment objective of segment i.

    ``prev_mu`` is the viewing bitrate of segment i-1 and ``buffer_before``
    the buffer b_{i-1} when segment i starts downloading.
    """

    omega: np.ndarray
    prev_mu: float
    buffer_before: float
    dbar: float
    beta: float = 1.0

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim != 1:
            raise InvalidArgument("omega must be a vector")
        if self.dbar <= 0:
            raise InvalidArgument(f"average capacity must be positive, got {self.dbar}")
        if self.buffer_before < 0:
            raise InvalidArgument("buffer cannot be negative")
        object.__setattr__(self, "omega", omega)

    @property
    def tiles(self) -> int:
        return len(self.omega)


def _pair(omega, r):
    omega = np.asarray(omega, dtype=float)
    r = np.asarray(r, dtype=float)
    if omega.shape[-1] != r.shape[-1]:
        raise InvalidArgument(f"length mismatch: {omega.shape[-1]} overlaps vs {r.shape[-1]} bitrates")
    return omega, r


def viewing_bitrate(omega, r):
    """Overlap-weighted sum of tile bitrates. Broadcasts over leading axes of ``r``."""
    omega, r = _pair(omega, r)
    return r @ omega if r.ndim > 1 else float(omega @ r)


def utility(mu, params: QoEParams):
    if np.any(np.asarray(mu) < 0):
        raise InvalidArgument("viewing bitrate cannot be negative")
    return params.u(mu)


def rebuffer_loss(durations, buffers_before, params: QoEParams) -> float:
    d = np.asarray(durations, dtype=float)
    b = np.asarray(buffers_before, dtype=float)
    if d.shape != b.shape:
        raise InvalidArgument("durations and buffers must align")
    return float(params.l_rb * np.sum(np.maximum(d - b, 0.0)))


def inter_degradation_loss(mus, params: QoEParams) -> float:
    mus = np.asarray(mus, dtype=float)
    if mus.size < 2:
        return 0.0
    return float(params.l_bd_e * np.sum(np.maximum(mus[:-1] - mus[1:], 0.0)))


def _intra_spread(omega, r):
    """sum_k omega_k [mu / sum(omega) - r_k]^+, vectorized over rows of ``r``."""
    total = omega.sum()
    if total <= 0:
        return np.zeros(r.shape[:-1]) if r.ndim > 1 else 0.0
    mean = (r @ omega) / total
    gap = np.maximum(np.expand_dims(mean, -1) - r, 0.0)
    return gap @ omega


def intra_degradation_loss(omega, r, params: QoEParams):
    """Intra-segment degradation loss of one segment (0 if nothing is viewed)."""
    omega, r = _pair(omega, r)
    out = params.l_bd_a * _intra_spread(omega, r)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class QoEBreakdown:
    utility: float
    rebuffer: float
    inter: float
    intra: float

    @property
    def total(self) -> float:
        return self.utility - self.rebuffer - (self.inter + self.intra)


def qoe_breakdown(omegas, decisions, durations, buffers_before, params: QoEParams) -> QoEBreakdown:
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    decisions = np.atleast_2d(np.asarray(decisions, dtype=float))
    if omegas.shape != decisions.shape:
        raise InvalidArgument("overlap and decision arrays must have the same shape")
    mus = np.array([viewing_bitrate(w, r) for w, r in zip(omegas, decisions)])
    return QoEBreakdown(
        utility=float(sum(utility(m, params) for m in mus)),
        rebuffer=rebuffer_loss(durations, buffers_before, params),
        inter=inter_degradation_loss(mus, params),
        intra=float(sum(intra_degradation_loss(w, r, params) for w, r in zip(omegas, decisions))),
    )


def total_qoe(omegas, decisions, durations, buffers_before, params: QoEParams) -> float:
    """Session QoE: utility minus rebuffering and degradation losses."""
    return qoe_breakdown(omegas, decisions, durations, buffers_before, params).total


def per_segment_qoe(r, ctx: SegmentContext, params: QoEParams):
    """Relaxed per-segment objective.

    The rebuffering and inter-segment terms are linear (no clamping at
    zero), which keeps the objective concave on the bitrate box. Accepts a
    single decision or a stack of decisions along the leading axis.
    """
    omega, r = _pair(ctx.omega, r)
    mu = r @ omega
    download_time = r.sum(axis=-1) * ctx.beta / ctx.dbar
    return (params.u(mu)
            - params.l_rb * (download_time - ctx.buffer_before)
            - params.l_bd_a * _intra_spread(omega, r)
            - params.l_bd_e * (ctx.prev_mu - mu))


def per_segment_subgradient(r, ctx: SegmentContext, params: QoEParams) -> np.ndarray:
    """A supergradient of the concave per-segment objective at ``r``.

    At kinks of ``[x]^+`` the zero-slope branch is taken.
    """
    omega, r = _pair(ctx.omega, r)
    mu = float(omega @ r)
    g = (params.du(mu) + params.l_bd_e) * omega - params.l_rb * ctx.beta / ctx.dbar
    total = omega.sum()
    if params.l_bd_a > 0 and total > 0:
        active = (mu / total - r) > 0
        w_active = float(omega[active].sum())
        spread_grad = omega * (w_active / total) - omega * active
        g = g - params.l_bd_a * spread_grad
    return g


def subgradient_bound(params: QoEParams, tiles: int, max_overlap_sum: float,
                      beta: float, d_min: float) -> float:
    """Analytic upper bound on the norm of any supergradient over the box."""
    per_coord = (float(params.du(0.0)) * max_overlap_sum
                 + params.l_bd_e * max_overlap_sum
                 + params.l_bd_a * tiles
                 + params.l_rb * beta / d_min)
    return per_coord * math.sqrt(tiles)
