"""A non-reversible spiral walk on Z^2.

The walk circles each sup-norm sphere S(k) counter-clockwise and moves
between neighbouring spheres according to a transient birth-and-death kernel
Q, so the sphere index seen at its change times is a Q-walk.

Points of S(k) are addressed by a perimeter position ``pos`` in [0, 8k):
pos 0 is the corner (k, -k) and positions increase counter-clockwise, so the
corners sit at 0, 2k, 4k, 6k.  The counter-clockwise edge out of ``pos`` is
tangential edge ``pos``; the radial edge from a non-corner point of S(k) to
S(k-1) is indexed by that outer point.  Both edge families use the offset
4k(k-1) into flat arrays.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numba
import numpy as np

from .bd_chain import BDWeights, _log_g_sq, _log_sq_tail

KOZMA = "kozma"
BOUNDED = "bounded-below"
VARIANTS = (KOZMA, BOUNDED)
CHUNK = 1 << 16


# --------------------------------------------------------------------------- geometry

class PointClass(NamedTuple):
    kind: str  # "origin" | "corner" | "side"
    k: int


def classify(p) -> PointClass:
    x, y = p
    k = max(abs(x), abs(y))
    if k == 0:
        return PointClass("origin", 0)
    return PointClass("corner" if abs(x) == abs(y) else "side", k)


def sphere_position(p) -> tuple[int, int]:
    """(k, pos) of a lattice point."""
    x, y = p
    k = max(abs(x), abs(y))
    if k == 0:
        return 0, 0
    if x == k and y > -k:
        pos = y + k
    elif y == k:
        pos = 2 * k + (k - x)
    elif x == -k:
        pos = 4 * k + (k - y)
    else:
        pos = 6 * k + (x + k)
    return k, pos % (8 * k)


def point_at(k: int, pos: int) -> tuple[int, int]:
    if k == 0:
        return 0, 0
    pos %= 8 * k
    side, t = divmod(pos, 2 * k)
    if side == 0:
        return k, t - k
    if side == 1:
        return k - t, k
    if side == 2:
        return -k, k - t
    return t - k, -k


def ccw_next(p):
    """Counter-clockwise neighbour on the same sphere."""
    k, pos = sphere_position(p)
    if k == 0:
        raise ValueError("the origin has no sphere neighbours")
    return point_at(k, pos + 1)


def cw_next(p):
    k, pos = sphere_position(p)
    if k == 0:
        raise ValueError("the origin has no sphere neighbours")
    return point_at(k, pos - 1)


def outward(p):
    """Neighbour on the next sphere, raising the saturated coordinate."""
    kind, k = classify(p)
    if kind == "origin":
        raise ValueError("the origin has four outward neighbours")
    if kind == "corner":
        raise ValueError("a corner has two outward neighbours")
    x, y = p
    return (x + (1 if x > 0 else -1), y) if abs(x) == k else (x, y + (1 if y > 0 else -1))


def inward(p):
    """Unique neighbour on the previous sphere; corners have none."""
    kind, k = classify(p)
    if kind != "side":
        raise ValueError(f"{kind} point {p} has no unique inward neighbour")
    x, y = p
    return (x - (1 if x > 0 else -1), y) if abs(x) == k else (x, y - (1 if y > 0 else -1))


def _outward_pos(k, pos):
    return pos + 2 * (pos // (2 * k)) + 1


def _inward_pos(k, pos):
    return (pos - 2 * (pos // (2 * k)) - 1) % (8 * (k - 1))


def offset(k: int) -> int:
    return 4 * k * (k - 1)


# --------------------------------------------------------------------------- kernel

def spiral_weights() -> BDWeights:
    """Radial weights w(k, k+1) = g_4(k) (log*^(5) k)^2, with k = 0 read as k = 1."""
    def log_omega(k):
        return _log_g_sq(4, np.maximum(np.asarray(k, dtype=float), 1.0))

    def tail_integral(M):
        return _log_sq_tail(4, float(M))

    return BDWeights(log_omega, "spiral-q", 4, tail_integral)


@dataclass
class SpiralConfig:
    """Parameters of a spiral run.

    ``horizon`` is the radius whose first hit ends the run.
    """

    variant: str = KOZMA
    horizon: int = 64
    max_steps: int = 10**9
    seed: int = 0
    weights: BDWeights = field(default_factory=spiral_weights)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    def q_out(self, K: int | None = None) -> np.ndarray:
        """Q(k, k+1) for k = 0..K."""
        K = self.horizon + 1 if K is None else K
        return self.weights.p_up(K + 1)


def step_distribution(p, config: SpiralConfig) -> list[tuple[tuple[int, int], float]]:
    """Exact one-step law from ``p``."""
    kind, k = classify(p)
    if kind == "origin":
        return [(q, 0.25) for q in ((1, 0), (0, 1), (-1, 0), (0, -1))]
    qo = float(config.q_out(k)[k])
    if config.variant == KOZMA:
        if kind == "corner":
            return [(ccw_next(p), 1.0)]
        stay = 1.0 - 1.0 / k**2
        out = [(outward(p), qo / k**2), (inward(p), (1.0 - qo) / k**2)]
        return ([(ccw_next(p), stay)] if stay > 0 else []) + out
    if kind == "corner":
        return [(ccw_next(p), 2 / 3), (cw_next(p), 1 / 3)]
    return [(ccw_next(p), 1 / 3), (cw_next(p), 1 / 6), (outward(p), qo / 2), (inward(p), (1.0 - qo) / 2)]


# --------------------------------------------------------------------------- engines
# state layout: st = [k, pos, steps]; tang/rad are flat edge arrays, laps per sphere.

@numba.njit(cache=True)
def _radial(st, q_out, u, tang, rad, n_up, n_down, origin_u):
    k, pos = st[0], st[1]
    if k == 0:
        pos = 2 * int(origin_u * 4.0) + 1
        rad[pos] += 1
        n_up[0] += 1
        st[0], st[1] = 1, pos
        return
    if u < q_out[k]:
        npos = pos + 2 * (pos // (2 * k)) + 1
        rad[4 * (k + 1) * k + npos] += 1
        n_up[k] += 1
        st[0], st[1] = k + 1, npos
    else:
        rad[4 * k * (k - 1) + pos] += 1
        n_down[k] += 1
        if k == 1:
            st[0], st[1] = 0, 0
        else:
            st[0], st[1] = k - 1, (pos - 2 * (pos // (2 * k)) - 1) % (8 * (k - 1))


@numba.njit(cache=True)
def _event_chunk(st, q_out, u, horizon, max_steps, tang, rad, laps, n_up, n_down):
    """Event engine for the ``"kozma"`` variant, one radial move per event; consumes two uniforms per event."""
    i = 0
    n = u.shape[0]
    while i + 2 <= n:
        k = st[0]
        if k >= horizon:
            return i, 1
        if st[2] >= max_steps:
            return i, 2
        if k == 0:
            _radial(st, q_out, 0.0, tang, rad, n_up, n_down, u[i])
            st[2] += 1
            i += 1
            continue
        pos = st[1]
        base = 4 * k * (k - 1)
        per = 8 * k
        if pos % (2 * k) == 0:
            # corner: forced counter-clockwise step
            tang[base + pos] += 1
            pos = (pos + 1) % per
            st[2] += 1
        if k > 1:
            q = 1.0 / (k * k)
            fails = int(np.floor(np.log(1.0 - u[i]) / np.log1p(-q)))
            m = per - 4
            nl = fails // m
            rem = fails - nl * m
            j0 = pos // (2 * k)
            s0 = pos - j0 - 1
            s1 = (s0 + rem) % m
            j1 = s1 // (2 * k - 1)
            p1 = s1 + j1 + 1
            d = (p1 - pos) % per
            laps[k] += nl
            for t in range(d):
                tang[base + (pos + t) % per] += 1
            st[2] += nl * per + d
            pos = p1
        st[1] = pos
        _radial(st, q_out, u[i + 1], tang, rad, n_up, n_down, 0.0)
        st[2] += 1
        i += 2
    return i, 0


@numba.njit(cache=True)
def _step_chunk(st, q_out, u, horizon, max_steps, tang, rad, n_up, n_down, bounded):
    """Step-by-step engine for both variants; one uniform per step."""
    n = u.shape[0]
    for i in range(n):
        k = st[0]
        if k >= horizon:
            return i, 1
        if st[2] >= max_steps:
            return i, 2
        st[2] += 1
        if k == 0:
            _radial(st, q_out, 0.0, tang, rad, n_up, n_down, u[i])
            continue
        pos = st[1]
        base = 4 * k * (k - 1)
        per = 8 * k
        corner = pos % (2 * k) == 0
        x = u[i]
        if bounded:
            if corner:
                if x < 2.0 / 3.0:
                    tang[base + pos] += 1
                    st[1] = (pos + 1) % per
                else:
                    st[1] = (pos - 1) % per
                    tang[base + st[1]] += 1
                continue
            if x < 1.0 / 3.0:
                tang[base + pos] += 1
                st[1] = (pos + 1) % per
            elif x < 0.5:
                st[1] = (pos - 1) % per
                tang[base + st[1]] += 1
            else:
                _radial(st, q_out, (x - 0.5) * 2.0, tang, rad, n_up, n_down, 0.0)
            continue
        stay = 1.0 - 1.0 / (k * k)
        if corner or x < stay:
            tang[base + pos] += 1
            st[1] = (pos + 1) % per
        else:
            _radial(st, q_out, (x - stay) * (k * k), tang, rad, n_up, n_down, 0.0)
    if st[0] >= horizon:
        return n, 1
    if st[2] >= max_steps:
        return n, 2
    return n, 0


@dataclass
class EdgeCoverage:
    """Crossing counts of every lattice edge out to the run's horizon.

    ``n_up[k]`` / ``n_down[k]`` count moves from S(k) to S(k+1) / S(k-1).
    """

    variant: str
    horizon: int
    seed: int
    tang: np.ndarray
    rad: np.ndarray
    n_up: np.ndarray
    n_down: np.ndarray
    steps: int = 0
    status: str = "running"

    @classmethod
    def empty(cls, variant: str, horizon: int, seed: int = 0) -> "EdgeCoverage":
        size = offset(horizon + 2)
        return cls(variant, horizon, seed, np.zeros(size, np.int64), np.zeros(size, np.int64),
                   np.zeros(horizon + 2, np.int64), np.zeros(horizon + 2, np.int64))

    @property
    def reached(self) -> bool:
        return self.status == "complete"

    @property
    def down_transitions(self) -> np.ndarray:
        """Moves from S(k+1) to S(k), k = 0..horizon-1."""
        return self.n_down[1:self.horizon + 1].copy()

    def tangential(self, k: int) -> np.ndarray:
        return self.tang[offset(k):offset(k) + 8 * k]

    def radial(self, k: int) -> np.ndarray:
        """Counts of edges between S(k-1) and S(k), by outer position (corners excluded)."""
        seg = self.rad[offset(k):offset(k) + 8 * k]
        return seg[np.arange(8 * k) % (2 * k) != 0]

    def count(self, p, q) -> int:
        (k1, a), (k2, b) = sphere_position(p), sphere_position(q)
        if abs(p[0] - q[0]) + abs(p[1] - q[1]) != 1:
            raise ValueError("not a lattice edge")
        if k1 == k2:
            per = 8 * k1
            lo = a if (a + 1) % per == b else b
            return int(self.tang[offset(k1) + lo])
        k, pos = (k1, a) if k1 > k2 else (k2, b)
        return int(self.rad[offset(k) + pos])

    def edges(self, R: int | None = None):
        """Yield (p, q, count) for all lattice edges in the box of radius R."""
        R = self.horizon if R is None else R
        for k in range(1, R + 1):
            t = self.tangential(k)
            for pos in range(8 * k):
                yield point_at(k, pos), point_at(k, pos + 1), int(t[pos])
            for pos in range(8 * k):
                if pos % (2 * k):
                    inner = point_at(k - 1, _inward_pos(k, pos)) if k > 1 else (0, 0)
                    yield inner, point_at(k, pos), int(self.rad[offset(k) + pos])

    def check(self) -> list[str]:
        issues = []
        if np.any(self.tang < 0) or np.any(self.rad < 0):
            issues.append("negative count")
        for k in range(1, self.horizon + 1):
            across = self.radial(k).sum()
            if across != self.n_up[k - 1] + self.n_down[k]:
                issues.append(f"radial counts at sphere {k} disagree with transitions")
        return issues

    def summary(self, R: int) -> dict:
        rep = coverage_report(self, R)
        return {"variant": self.variant, "R": R, "seed": self.seed, "steps": int(self.steps),
                "horizon": self.horizon, "status": self.status,
                "uncovered_in_box": rep.n_uncovered,
                "down_transitions_per_k": [int(v) for v in self.down_transitions]}

    def save(self, prefix, R: int | None = None) -> tuple[Path, Path]:
        prefix = Path(prefix)
        R = self.horizon if R is None else R
        with open(prefix.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "y1", "x2", "y2", "count"])
            for p, q, c in self.edges(R):
                w.writerow([p[0], p[1], q[0], q[1], c])
        with open(prefix.with_suffix(".json"), "w", encoding="utf-8") as fh:
            json.dump(self.summary(R), fh, indent=2)
        return prefix.with_suffix(".csv"), prefix.with_suffix(".json")


def simulate(config: SpiralConfig, engine: str = "auto") -> EdgeCoverage:
    """Run from the origin until S(horizon) is hit or the step budget is spent.

    ``engine="event"`` (kozma variant only) jumps over runs of tangential
    moves; ``"step"`` moves one step at a time.  Both sample the same law.
    The event engine checks the budget between radial moves, so a stopped run may
    overshoot ``max_steps`` by one stretch of tangential steps.
    """
    if engine == "auto":
        engine = "event" if config.variant == KOZMA else "step"
    if engine == "event" and config.variant != KOZMA:
        raise ValueError("the event engine covers the kozma variant only")
    cov = EdgeCoverage.empty(config.variant, config.horizon, config.seed)
    q = config.q_out()
    rng = np.random.default_rng(config.seed)
    st = np.zeros(3, np.int64)
    laps = np.zeros(config.horizon + 2, np.int64)
    while True:
        u = rng.random(CHUNK)
        if engine == "event":
            _, status = _event_chunk(st, q, u, config.horizon, config.max_steps,
                                     cov.tang, cov.rad, laps, cov.n_up, cov.n_down)
        else:
            _, status = _step_chunk(st, q, u, config.horizon, config.max_steps,
                                    cov.tang, cov.rad, cov.n_up, cov.n_down, config.variant == BOUNDED)
        if status:
            break
    for k in range(1, config.horizon + 1):
        if laps[k]:
            cov.tang[offset(k):offset(k) + 8 * k] += laps[k]
    cov.steps = int(st[2])
    cov.status = "complete" if status == 1 else "budget"
    return cov


# --------------------------------------------------------------------------- reports

@dataclass
class CoverageReport:
    R: int
    uncovered: list
    annulus_min: np.ndarray
    radial_uncrossed: np.ndarray

    @property
    def n_uncovered(self) -> int:
        return len(self.uncovered)

    @property
    def covered(self) -> bool:
        return not self.uncovered


def box_covered(cov: EdgeCoverage, R: int) -> bool:
    """Whether every lattice edge with both ends in the radius-R box was crossed."""
    hi = offset(R + 1)
    if np.any(cov.tang[:hi] == 0):
        return False
    for k in range(1, R + 1):
        if np.any(cov.radial(k) == 0):
            return False
    return True


def coverage_report(cov: EdgeCoverage, R: int) -> CoverageReport:
    """Uncovered edges in the box of radius R and per-sphere diagnostics.

    ``annulus_min[k-1]`` is the least count over the tangential edges of S(k)
    and the radial edges between S(k-1) and S(k); ``radial_uncrossed[k]``
    counts uncrossed edges between S(k) and S(k+1).
    """
    if R > cov.horizon:
        raise ValueError("box exceeds the simulated horizon")
    unc = [(p, q) for p, q, c in cov.edges(R) if c == 0]
    amin = np.array([min(cov.tangential(k).min(), cov.radial(k).min()) for k in range(1, R + 1)])
    runc = np.array([int((cov.radial(k + 1) == 0).sum()) for k in range(R)])
    return CoverageReport(R, unc, amin, runc)


def q_transition_table(covs, config: SpiralConfig, bands) -> list[dict]:
    """Empirical vs exact Q(k, k+1) pooled over sphere-index bands.

    Each band [lo, hi) pools the up/down move counts of its levels; the
    exact value is the count-weighted mean of Q(k, k+1) over the band.
    """
    q = config.q_out()
    up = np.sum([c.n_up for c in covs], axis=0)
    dn = np.sum([c.n_down for c in covs], axis=0)
    rows = []
    for lo, hi in bands:
        ks = np.arange(lo, hi)
        n = up[ks] + dn[ks]
        tot = int(n.sum())
        if tot == 0:
            rows.append({"band": (lo, hi), "n": 0})
            continue
        emp = up[ks].sum() / tot
        exact = float(np.sum(n * q[ks]) / tot)
        se = float(np.sqrt(np.sum(n * q[ks] * (1 - q[ks]))) / tot)
        rows.append({"band": (lo, hi), "n": tot, "empirical": float(emp), "exact": exact, "se": se,
                     "z": float((emp - exact) / se) if se > 0 else 0.0})
    return rows


__all__ = [
    "BOUNDED", "KOZMA", "VARIANTS", "CoverageReport", "EdgeCoverage", "PointClass", "SpiralConfig", "box_covered",
    "ccw_next", "classify", "coverage_report", "cw_next", "inward", "offset", "outward", "point_at",
    "q_transition_table", "simulate", "sphere_position", "spiral_weights", "step_distribution",
]
