"""Trace networks of simulated paths and recurrence diagnostics.

A trace is the set of visited states together with the number of times each
undirected edge was crossed.  Resistance profiles measure the effective
resistance from the origin to the complement of growing balls, either in the
trace network or in the network of expected crossing counts.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numba
import numpy as np
import scipy.sparse.csgraph as csg

from .bd_chain import CrossingLedger
from .chain_core import (KILLED, ChainError, FiniteChain, Measure, Network, TransitionKernel,
                         truncate)
from .planar_spiral import EdgeCoverage
from .potential import NonTransient, expected_crossings, network_capacity, resistance_profile

SLOPE_TOL = 1e-3           # resistance gain per octave needed for a "diverging" verdict
TRANSIENCE_RTOL = 1e-6     # allowed change of E_o[N] near the origin when the truncation doubles


def sup_radius(x) -> float:
    """|x| on the line, max(|x|, |y|) on the lattice."""
    if isinstance(x, tuple):
        return float(max(abs(c) for c in x))
    return float(abs(x))


@dataclass
class TraceRecord:
    """Visited states and crossing counts of one path."""

    origin: object
    network: Network
    meta: dict = field(default_factory=dict)

    @property
    def vertices(self) -> frozenset:
        return frozenset(self.network.vertices)

    def crossings(self, u, v) -> float:
        return self.network.weight(u, v)

    def check(self) -> list[str]:
        problems = []
        if self.origin not in self.network:
            problems.append("origin not on the trace")
        if self.network.W.nnz and self.network.W.data.min() < 1:
            problems.append("trace edge with fewer than one crossing")
        k, _ = csg.connected_components(self.network.W, directed=False)
        if k > 1:
            problems.append(f"trace has {k} components")
        return problems


def _from_path(path: Sequence):
    if len(path) == 0:
        raise ChainError("empty path")
    counts = {}
    for u, v in zip(path[:-1], path[1:]):
        if u != v:
            key = frozenset((u, v))
            counts[key] = counts.get(key, 0) + 1
    verts = list(dict.fromkeys(path))
    return path[0], verts, [(*sorted(e, key=repr), c) for e, c in counts.items()]


def record_trace(source, meta: dict | None = None, radius: int | None = None) -> TraceRecord:
    """Trace network of a birth-death ledger, a lattice coverage table or an explicit path.

    ``radius`` limits a lattice coverage table to a box.
    """
    meta = dict(meta or {})
    if isinstance(source, CrossingLedger):
        N = source.crossings
        if source.visits.sum() == 0:
            raise ChainError("empty path")
        m = N.size
        edges = [(i, i + 1, float(N[i])) for i in range(m)]
        net = Network.from_edges(edges, vertices=list(range(m + 1)))
        meta.update(seed=source.seed, steps=int(source.steps), weights=source.weights_tag)
        return TraceRecord(0, net, meta)
    if isinstance(source, EdgeCoverage):
        edges = [(p, q, float(c)) for p, q, c in source.edges(radius) if c > 0]
        if not edges:
            raise ChainError("empty path")
        net = Network.from_edges(edges)
        if (0, 0) not in net:
            raise ChainError("coverage table does not contain the origin")
        meta.update(seed=source.seed, steps=int(source.steps), variant=source.variant)
        return TraceRecord((0, 0), net, meta)
    origin, verts, edges = _from_path(list(source))
    net = Network.from_edges(edges, vertices=verts)
    meta.setdefault("steps", len(source) - 1)
    return TraceRecord(origin, net, meta)


def load_trace(prefix) -> TraceRecord:
    """Trace from files written by a birth-death ledger or a lattice coverage table."""
    prefix = Path(prefix)
    with open(prefix.with_suffix(".json"), encoding="utf-8") as fh:
        head = json.load(fh)
    if "variant" not in head:
        return record_trace(CrossingLedger.load(prefix))
    edges = []
    with open(prefix.with_suffix(".csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            c = int(row["count"])
            if c > 0:
                edges.append(((int(row["x1"]), int(row["y1"])), (int(row["x2"]), int(row["y2"])), float(c)))
    if not edges:
        raise ChainError("empty path")
    meta = {k: head.get(k) for k in ("seed", "steps", "variant")}
    return TraceRecord((0, 0), Network.from_edges(edges), meta)


def harmonic_crossing_sum(counts, n: int | None = None) -> np.ndarray:
    """Partial sums S(m) = sum_{i<m} 1/N(i, i+1) for m = 1..n.

    ``counts`` is a birth-death ledger or the array of N(i, i+1).
    """
    N = counts.crossings if isinstance(counts, CrossingLedger) else np.asarray(counts)
    n = N.size if n is None else n
    if n > N.size or np.any(N[:n] <= 0):
        raise ChainError("zero crossing count below the requested level")
    return np.cumsum(1.0 / N[:n].astype(float))


# --------------------------------------------------------------------------- profiles

@dataclass
class RecurrenceProfile:
    """Effective resistance from the origin to the outside of each ball."""

    radii: np.ndarray
    resistance: np.ndarray
    resistance_unit: np.ndarray | None = None

    @property
    def monotone(self) -> bool:
        r = self.resistance
        ok = bool(np.all(np.diff(r) >= -1e-12 * np.maximum(1.0, np.abs(r[1:]))))
        if self.resistance_unit is not None:
            u = self.resistance_unit
            ok &= bool(np.all(np.diff(u) >= -1e-12 * np.maximum(1.0, np.abs(u[1:]))))
        return ok

    @property
    def verdict(self) -> str:
        """"diverging" when the top quartile of radii still gains resistance per octave."""
        r = self.resistance
        if np.any(np.isinf(r)):
            return "diverging"
        k = max(2, math.ceil(len(r) / 4))
        if len(r) < 2:
            return "inconclusive"
        x = np.log2(self.radii[-k:].astype(float))
        slope = np.polyfit(x, r[-k:], 1)[0]
        return "diverging" if slope > SLOPE_TOL else "inconclusive"

    def ratio(self, big: float, small: float) -> float:
        idx = {float(R): i for i, R in enumerate(self.radii)}
        return float(self.resistance[idx[float(big)]] / self.resistance[idx[float(small)]])

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["R", "resistance_N", "resistance_unit"])
            unit = self.resistance_unit if self.resistance_unit is not None else [""] * len(self.radii)
            for R, r, u in zip(self.radii, self.resistance, unit):
                w.writerow([int(R), repr(float(r)), "" if u == "" else repr(float(u))])

    def as_dict(self) -> dict:
        return {"radii": [int(R) for R in self.radii], "resistance_N": self.resistance.tolist(),
                "resistance_unit": None if self.resistance_unit is None else self.resistance_unit.tolist(),
                "verdict": self.verdict, "monotone": self.monotone}


def trace_resistance_profile(trace: TraceRecord, radii: Sequence, radius: Callable = sup_radius,
                             unit: bool = True) -> RecurrenceProfile:
    """Resistance profile of the trace weighted by N and, optionally, by 1."""
    radii = np.asarray(radii)
    net = trace.network
    r = resistance_profile(net, [trace.origin], radius, radii)
    ru = resistance_profile(net.unit(), [trace.origin], radius, radii) if unit else None
    return RecurrenceProfile(radii, r, ru)


def _crossings_near(net: Network, origin) -> float:
    i = net.index(origin)
    return float(net.W[i].sum())


def expected_network_profile(chain: TransitionKernel | FiniteChain, pi: Measure | None = None, o=None,
                             radii: Sequence = (), radius: Callable | None = None,
                             horizon: int | None = None) -> RecurrenceProfile:
    """Resistance profile of the network with weights E_o[N(e)].

    A kernel is truncated (killed) at ``horizon`` (default twice the largest
    radius) and at half of it; if the expected crossings at the origin
    still move, the chain is treated as recurrent and :class:`NonTransient`
    is raised.  A finite killed chain is used as it is.
    """
    radii = np.asarray(radii)
    if isinstance(chain, TransitionKernel):
        rad = radius or chain.radius or sup_radius
        H = int(horizon or 2 * radii.max())
        near = []
        for h in (H // 2, H):
            fin = truncate(chain, h, KILLED)
            net = expected_crossings(fin, o, pi, check_bound=False)
            near.append(_crossings_near(net, fin.origin if o is None else o))
        if abs(near[1] - near[0]) > TRANSIENCE_RTOL * near[1]:
            raise NonTransient(f"expected crossings at the origin change from {near[0]:.6g} to "
                               f"{near[1]:.6g} when the truncation doubles")
        origin = fin.origin if o is None else o
    else:
        fin = chain
        rad = radius or sup_radius
        net = expected_crossings(fin, o, pi, check_bound=False)
        origin = fin.origin if o is None else o
    r = resistance_profile(net, [origin], rad, radii)
    return RecurrenceProfile(radii, r)


# --------------------------------------------------------------------------- concavity

@numba.njit(cache=True)
def _walk(indptr, indices, cum, start, absorb, u, path):
    """Fill ``path`` from ``start``; returns (length, position)."""
    pos = start
    n = 0
    path[n] = pos
    n += 1
    for t in range(u.shape[0]):
        if pos == absorb or n >= path.shape[0]:
            break
        lo, hi = indptr[pos], indptr[pos + 1]
        x = u[t]
        j = hi - 1
        for k in range(lo, hi):
            if x < cum[k]:
                j = k
                break
        pos = indices[j]
        path[n] = pos
        n += 1
    return n, pos


def sample_path(chain: FiniteChain, rng: np.random.Generator, start=None,
                max_steps: int = 10_000_000, chunk: int = 4096) -> np.ndarray:
    """Indices visited by the killed chain from ``start`` until it reaches the outside."""
    if not chain.has_outside:
        raise ChainError("sample_path needs a killed chain")
    P = chain.matrix.tocsr()
    P.sort_indices()
    cum = np.empty_like(P.data)
    for i in range(P.shape[0]):
        lo, hi = P.indptr[i], P.indptr[i + 1]
        cum[lo:hi] = np.cumsum(P.data[lo:hi])
    absorb = chain.n
    pos = chain.index(chain.origin if start is None else start)
    pieces = []
    total = 0
    while True:
        buf = np.empty(chunk + 1, dtype=np.int64)
        n, pos = _walk(P.indptr, P.indices, cum, pos, absorb, rng.random(chunk), buf)
        pieces.append(buf[:n] if not pieces else buf[1:n])
        total += n - 1
        if pos == absorb:
            return np.concatenate(pieces)
        if total >= max_steps:
            raise ChainError("walk did not reach the outside within max_steps")


def path_network(chain: FiniteChain, path: np.ndarray) -> Network:
    """Crossing-count network of an index path; the outside keeps its label."""
    a, b = path[:-1], path[1:]
    keep = a != b
    lo, hi = np.minimum(a[keep], b[keep]), np.maximum(a[keep], b[keep])
    pairs, counts = np.unique(np.stack([lo, hi], axis=1), axis=0, return_counts=True)
    labels = chain.labels
    verts = [labels[i] for i in np.unique(path)]
    return Network.from_edges([(labels[i], labels[j], float(c)) for (i, j), c in zip(pairs, counts)],
                              vertices=verts)


@dataclass
class ConcavityRecord:
    """Monte-Carlo mean of Cap(A; N) against Cap(A; E_o[N])."""

    mean: float
    se: float
    runs: int
    expected_network_capacity: float
    seed: int | None = None

    @property
    def holds(self) -> bool:
        """Mean within three standard errors of the upper bound."""
        return self.mean <= self.expected_network_capacity + 3 * self.se + 1e-10

    def as_dict(self) -> dict:
        return {"mean_cap_N": self.mean, "se": self.se, "runs": self.runs,
                "cap_expected_N": self.expected_network_capacity, "holds": self.holds, "seed": self.seed}

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2)


def concavity_check(chain: FiniteChain, pi: Measure | None, o=None, A: Iterable = (), runs: int = 1000,
                    seed: int = 0) -> ConcavityRecord:
    """Compare E_o[Cap(A; N)] with Cap(A; E_o[N]) on a killed chain, capacities toward the outside."""
    A = list(A)
    o = chain.origin if o is None else o
    if not A:
        return ConcavityRecord(0.0, 0.0, runs, 0.0, seed)
    rhs = network_capacity(expected_crossings(chain, o, pi, check_bound=False), A)
    rng = np.random.default_rng(seed)
    vals = np.empty(runs)
    for r in range(runs):
        net = path_network(chain, sample_path(chain, rng, o))
        hit = [a for a in A if a in net]
        vals[r] = network_capacity(net, hit) if hit else 0.0
    se = float(vals.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return ConcavityRecord(float(vals.mean()), se, runs, float(rhs), seed)


__all__ = ["ConcavityRecord", "RecurrenceProfile", "TraceRecord", "concavity_check",
           "expected_network_profile", "harmonic_crossing_sum", "load_trace", "path_network", "record_trace",
           "sample_path", "sup_radius", "trace_resistance_profile"]
