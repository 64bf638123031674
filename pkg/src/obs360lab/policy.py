"""OBS360 online bitrate selection and simple baseline policies."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument
from .model import BitrateLadder
from .oracles import compute_J, per_segment_optimum
from .qoe import QoEParams, per_segment_subgradient


def ogd_update(r_J, grad, alpha: float, ladder: BitrateLadder) -> np.ndarray:
    """Proximal step  argmin_r -g.(r - r_J) + ||r - r_J||^2 / (2 alpha).

    The objective separates by coordinate. On the hull the answer is the
    clipped gradient step; on the discrete ladder each coordinate takes the
    better of the two levels bracketing the unconstrained target, with the
    lower level winning exact ties.
    """
    if alpha <= 0:
        raise InvalidArgument("alpha must be positive")
    r_J = np.asarray(r_J, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if r_J.shape != grad.shape:
        raise InvalidArgument("gradient and decision lengths differ")
    target = r_J + alpha * grad
    if ladder.convex:
        return ladder.clip(target)

    levels = ladder.array
    hi = np.clip(np.searchsorted(levels, target), 0, len(levels) - 1)
    lo = np.clip(hi - 1, 0, len(levels) - 1)

    def obj(x):
        d = x - r_J
        return -grad * d + d * d / (2 * alpha)

    a, b = levels[lo], levels[hi]
    return np.where(obj(b) < obj(a), b, a)


def rate_limit(r_new, r_prev, ladder: BitrateLadder) -> np.ndarray:
    """Keep every tile within one ladder level of its previous bitrate."""
    new = np.atleast_1d(ladder.level_of(r_new))
    prev = np.atleast_1d(ladder.level_of(r_prev))
    return ladder.at(np.clip(new, prev - 1, prev + 1))


def horizon_alpha(alpha0: float, segments: int, gamma: float = 2.0) -> float:
    """Step size alpha0 * I^(-1/gamma); sublinear regret needs gamma > 1."""
    if gamma <= 1:
        raise InvalidArgument("gamma must exceed 1")
    return alpha0 * segments ** (-1.0 / gamma)


class OBS360:
    """Online bitrate selection driven by batches of revealed segments.

    Every time segments are revealed, their realized per-segment problems
    are solved; the member whose supergradient points least toward its own
    optimum is chosen and a proximal gradient step is taken from its
    decision. With nothing revealed the previous decision is repeated.
    """

    name = "obs360"

    def __init__(self, ladder: BitrateLadder, params: QoEParams, tiles: int,
                 alpha: float = 1.0, r0=None, limit_rate: bool = True,
                 method: str = "auto"):
        if alpha <= 0:
            raise InvalidArgument("alpha must be positive")
        self.ladder = ladder
        self.params = params
        self.tiles = tiles
        self.alpha = alpha
        self.method = method
        # rate limiting is defined on ladder levels only
        self.limit_rate = limit_rate and not ladder.convex
        if r0 is None:
            r0 = np.full(tiles, ladder.at(ladder.median_level))
        self.r0 = np.asarray(r0, dtype=float)
        if not ladder.feasible(self.r0) or self.r0.shape != (tiles,):
            raise InvalidArgument(f"initial decision {r0} is not feasible")
        self.last = self.r0.copy()
        self.decisions: dict[int, np.ndarray] = {}
        self.contexts = {}
        self.grads: dict[int, np.ndarray] = {}
        self.optima: dict[int, np.ndarray] = {}
        self.J: dict[int, int] = {}

    def _absorb(self, rz):
        j = rz.index
        self.decisions[j] = np.asarray(rz.decision, dtype=float)
        self.contexts[j] = rz.context
        self.grads[j] = per_segment_subgradient(rz.decision, rz.context, self.params)
        self.optima[j] = per_segment_optimum(rz.context, self.params, self.ladder, self.method).r

    def decide(self, i, revealed):
        for rz in revealed:
            self._absorb(rz)
        members = [rz.index for rz in revealed]
        if members:
            J = compute_J(members, self.grads, self.optima, self.decisions)
            self.J[i] = J
            r = ogd_update(self.decisions[J], self.grads[J], self.alpha, self.ladder)
            if self.limit_rate:
                r = rate_limit(r, self.last, self.ladder)
        else:
            r = self.last.copy()
        self.decisions[i] = r
        self.last = r
        return r


class ConstantPolicy:
    def __init__(self, ladder: BitrateLadder, tiles: int, level: int | None = None):
        level = ladder.median_level if level is None else level
        self.name = f"constant:{level}"
        self.r = np.full(tiles, ladder.at(level))

    def decide(self, i, revealed):
        return self.r.copy()


class GreedyCapacityPolicy:
    """Largest uniform level whose segment would download within one segment
    length at the most recently revealed average capacity."""

    name = "greedy-capacity"

    def __init__(self, ladder: BitrateLadder, tiles: int, r0=None):
        self.ladder = ladder
        self.tiles = tiles
        self.r = (np.full(tiles, ladder.at(ladder.median_level)) if r0 is None
                  else np.asarray(r0, dtype=float))

    def decide(self, i, revealed):
        if revealed:
            dbar = revealed[-1].context.dbar
            ok = self.tiles * self.ladder.array <= dbar
            level = self.ladder.array[ok][-1] if ok.any() else self.ladder.r_min
            self.r = np.full(self.tiles, level)
        return self.r.copy()


POLICY_NAMES = ("obs360", "obs360-unlimited", "constant:<level>", "greedy-capacity")


def make_policy(name: str, ladder: BitrateLadder, params: QoEParams, tiles: int, *,
                alpha: float = 1.0, r0=None, method: str = "auto", limit_rate: bool = True):
    """Build a policy from its config name.

    ``constant:<level>`` takes a 1-based level or ``median``.
    """
    if name == "obs360":
        return OBS360(ladder, params, tiles, alpha, r0, limit_rate, method)
    if name == "obs360-unlimited":
        pol = OBS360(ladder, params, tiles, alpha, r0, False, method)
        pol.name = name
        return pol
    if name == "greedy-capacity":
        return GreedyCapacityPolicy(ladder, tiles, r0)
    if name.startswith("constant:"):
        arg = name.split(":", 1)[1]
        if arg == "median":
            level = ladder.median_level
        else:
            try:
                level = int(arg)
            except ValueError:
                raise InvalidArgument(f"bad constant level in {name!r}") from None
        if not 1 <= level <= len(ladder):
            raise InvalidArgument(f"constant level {level} outside 1..{len(ladder)}")
        pol = ConstantPolicy(ladder, tiles, level)
        pol.name = name
        return pol
    raise InvalidArgument(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
