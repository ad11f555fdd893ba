"""Voltages, Green functions, capacities and electrical quantities on finite chains.

Hitting problems are solved exactly on a :class:`~tracelab.chain_core.FiniteChain`.
On a killed truncation the outside state plays the role of infinity: setting
its value to 0 gives a lower bound for a voltage, setting it to 1 an upper
bound.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph  # noqa: F401  (registers sp.csgraph)

from .chain_core import (OUTSIDE, ChainError, FiniteChain, Measure, Network, _solve,
                         format_state, reversal_matrix, symmetrized_chain, time_reversal)

SOLVE_TOL = 1e-10
BRACKET_TOL = 1e-6
PRUNE_RTOL = 1e-200     # relative edge weight below which resistance solves drop the edge


class DeltaCollision(ValueError):
    """A level ``delta`` coincides with a voltage value within tolerance."""


class NonTransient(ValueError):
    """Green function does not settle as the truncation grows."""


# --------------------------------------------------------------------------- hitting solves

def _reaches(P: sp.csr_matrix, targets: np.ndarray) -> np.ndarray:
    """Boolean mask of states from which ``targets`` can be reached."""
    G = (P != 0).astype(np.int8).T.tocsr()
    mask = np.zeros(P.shape[0], dtype=bool)
    frontier = list(targets)
    mask[targets] = True
    while frontier:
        nxt = []
        for i in frontier:
            for j in G.indices[G.indptr[i]:G.indptr[i + 1]]:
                if not mask[j]:
                    mask[j] = True
                    nxt.append(j)
        frontier = nxt
    return mask


def hitting_probability(P: sp.csr_matrix, target, avoid=()) -> tuple[np.ndarray, float]:
    """h(x) = Pr_x[hit ``target`` before ``avoid``], target/avoid given as index arrays.

    Returns the solution over all indices and the residual of the linear system.
    States that can reach neither set get probability 0.
    """
    P = sp.csr_matrix(P)
    n = P.shape[0]
    target = np.asarray(list(target), dtype=np.int64)
    avoid = np.asarray(list(avoid), dtype=np.int64)
    h = np.zeros(n)
    h[target] = 1.0
    fixed = np.zeros(n, dtype=bool)
    fixed[target] = True
    fixed[avoid] = True
    live = _reaches(P, target) & ~fixed
    free = np.flatnonzero(live)
    if free.size == 0:
        return h, 0.0
    Pff = P[free][:, free]
    rhs = np.asarray(P[free][:, target].sum(axis=1)).ravel()
    A = sp.identity(free.size, format="csr") - Pff
    x = _solve(A, rhs)
    resid = float(np.abs(A @ x - rhs).max())
    if not np.all(np.isfinite(x)) or resid > SOLVE_TOL * max(1.0, np.abs(x).max()):
        raise ChainError(f"hitting system singular or ill-conditioned (residual {resid:.2e})")
    h[free] = x
    return h, resid


# --------------------------------------------------------------------------- voltages

@dataclass
class VoltageField:
    """Two-sided bounds on v_A(x) = Pr_x[T_A < infinity] on the interior states."""

    chain: FiniteChain
    A: frozenset
    lower: np.ndarray
    upper: np.ndarray
    direction: str = "forward"
    residual: float = 0.0

    def __getitem__(self, x) -> float:
        """Midpoint of the bracket (the exact value when the gap is zero)."""
        if x is OUTSIDE:
            return 0.0
        i = self.chain.index(x)
        return 0.5 * (self.lower[i] + self.upper[i])

    def bounds(self, x) -> tuple[float, float]:
        if x is OUTSIDE:
            return 0.0, 0.0
        i = self.chain.index(x)
        return float(self.lower[i]), float(self.upper[i])

    @property
    def gap(self) -> np.ndarray:
        return self.upper - self.lower

    def max_gap(self, region: Iterable | None = None) -> float:
        if region is None:
            return float(self.gap.max())
        idx = self.chain.indices(region)
        return float(self.gap[idx].max())

    def converged(self, tol: float = BRACKET_TOL, region=None) -> bool:
        return self.max_gap(region) < tol

    def as_dict(self) -> dict:
        return {x: self[x] for x in self.chain.states}


def voltage(chain: FiniteChain, A: Iterable, direction: str = "forward",
            pi: Measure | None = None, outside: str = "bracket") -> VoltageField:
    """Voltage of the set ``A`` on a finite chain.

    With ``outside="bracket"`` the lower bound kills the walk at the outside
    state and the upper bound counts reaching it as success; both bound the
    voltage of the untruncated chain.  With ``outside="cemetery"`` the killed
    chain itself is the object and the field is exact (lower == upper).
    ``direction="reversed"`` works with the time reversal, which needs ``pi``.
    """
    if outside not in ("bracket", "cemetery"):
        raise ChainError(f"unknown outside rule {outside!r}")
    A = frozenset(A)
    if not A:
        raise ChainError("voltage needs a nonempty target set")
    if direction == "reversed":
        if pi is None:
            raise ChainError("reversed voltage needs a measure")
        work = time_reversal(chain, pi)
    elif direction == "forward":
        work = chain
    else:
        raise ChainError(f"unknown direction {direction!r}")
    tgt = chain.indices(A)
    n = chain.n
    P = work.matrix
    if chain.has_outside:
        low, r1 = hitting_probability(P, tgt, [n])
        lower = low[:n]
        if outside == "cemetery":
            upper, r2 = lower, 0.0
        else:
            high, r2 = hitting_probability(P, np.append(tgt, n))
            upper = high[:n]
    else:
        v, r1 = hitting_probability(P, tgt)
        r2 = 0.0
        lower = upper = v[:n]
    if np.all(lower[np.setdiff1d(np.arange(n), tgt)] == 0) and n > len(tgt):
        reach = _reaches(P, tgt)
        if not reach[:n].any():
            raise ChainError("target set unreachable")
    return VoltageField(chain, A, lower.copy(), upper.copy(), direction, max(r1, r2))


def voltage_ladder(chains: Sequence[FiniteChain], A, x, direction="forward", pi=None):
    """Brackets of v_A(x) along a sequence of truncations."""
    out = []
    for ch in chains:
        f = voltage(ch, A, direction, pi)
        out.append(f.bounds(x))
    return out


# --------------------------------------------------------------------------- Green function

@dataclass
class GreenTable:
    """Expected visits G(o, x) before absorption, and alpha = G(o,o)/pi(o)."""

    chain: FiniteChain
    origin: object
    values: np.ndarray
    alpha: float | None = None
    residual: float = 0.0

    def __getitem__(self, x) -> float:
        if x is OUTSIDE:
            raise ChainError("Green function at the outside state is not defined")
        return float(self.values[self.chain.index(x)])


def green_function(chain: FiniteChain, o=None, pi: Measure | None = None) -> GreenTable:
    """G(o, .) on a killed chain: solves (I - P_int)^T g = e_o."""
    if not chain.has_outside or chain.matrix[chain.n, chain.n] != 1.0:
        raise NonTransient("Green function needs a killed chain (absorbing outside state)")
    o = chain.origin if o is None else o
    n = chain.n
    io = chain.index(o)
    Pin = chain.matrix[:n, :n]
    A = (sp.identity(n, format="csr") - Pin).T.tocsr()
    e = np.zeros(n)
    e[io] = 1.0
    g = _solve(A, e)
    resid = float(np.abs(A @ g - e).max())
    if not np.all(np.isfinite(g)) or np.any(g < -1e-12):
        raise NonTransient("Green system is singular: the walk does not leave the truncation")
    alpha = None if pi is None else g[io] / pi(o)
    return GreenTable(chain, o, g, alpha, resid)


def green_identity_residual(chain: FiniteChain, pi: Measure, o=None) -> float:
    """max_y |G(o,y) - pi(y) v*_o(y) G(o,o) / pi(o)| relative to G(o,o)."""
    o = chain.origin if o is None else o
    G = green_function(chain, o, pi)
    vstar = voltage(chain, [o], "reversed", pi, "cemetery").lower
    piv = pi.vector(chain)
    io = chain.index(o)
    pred = piv * vstar * G.values[io] / piv[io]
    return float(np.abs(pred - G.values).max() / G.values[io])


# --------------------------------------------------------------------------- crossings

def expected_crossings(chain: FiniteChain, o=None, pi: Measure | None = None,
                       include_outside: bool = True, check_bound: bool = True,
                       tol: float = 1e-9) -> Network:
    """Network with weight E_o[N(x,y)] = G(o,x)P(x,y) + G(o,y)P(y,x) on each edge.

    The edge from x to the outside (crossed at most once, on the way out) gets
    G(o,x)P(x,OUT).  When ``pi`` is given and ``check_bound`` is set, the bound
    E_o[N(x,y)] <= 2 alpha c_s(x,y) max(v*(x), v*(y)) is verified and its
    worst excess stored on the result as ``bound_excess``.
    """
    o = chain.origin if o is None else o
    G = green_function(chain, o, pi)
    n = chain.n
    P = chain.matrix.tocoo()
    size = chain.size
    g = np.append(G.values, 0.0) if chain.has_outside else G.values
    flow = g[P.row] * P.data
    keep = (P.row != P.col) & (P.row < n)
    if not include_outside and chain.has_outside:
        keep &= P.col < n
    F = sp.coo_matrix((flow[keep], (P.row[keep], P.col[keep])), shape=(size, size)).tocsr()
    net = Network(chain.labels, F + F.T)
    net.green = G
    net.bound_excess = None
    if pi is not None and check_bound:
        net.bound_excess = _crossing_bound_excess(chain, pi, o, G, net)
        if net.bound_excess > tol:
            raise ChainError(f"crossing bound violated by {net.bound_excess:.3e}")
    return net


def _crossing_bound_excess(chain, pi, o, G, net) -> float:
    from .chain_core import additive_symmetrization

    cs = additive_symmetrization(chain, pi)
    vstar = voltage(chain, [o], "reversed", pi, "cemetery").lower
    vs = np.append(vstar, 0.0) if chain.has_outside else vstar
    alpha = G.alpha
    W = sp.triu(net.W, k=1).tocoo()
    idx = {v: i for i, v in enumerate(cs.vertices)}
    worst = 0.0
    for i, j, w in zip(W.row, W.col, W.data):
        u, v = net.vertices[i], net.vertices[j]
        c = cs.W[idx[u], idx[v]]
        bound = 2 * alpha * c * max(vs[chain.index(u)], vs[chain.index(v)])
        worst = max(worst, (w - bound) / max(1.0, w))
    return float(worst)


# --------------------------------------------------------------------------- capacities

@dataclass
class CapacityEstimate:
    """Capacity values along a sequence of truncations.

    ``value`` is the last (largest truncation) value, which bounds the
    infinite-volume capacity from above.
    """

    value: float
    sequence: list
    truncations: list
    sets: dict
    residuals: list = field(default_factory=list)
    lower: float | None = None

    @property
    def monotone(self) -> bool:
        s = np.asarray(self.sequence)
        return bool(np.all(np.diff(s) <= 1e-12 * np.maximum(1.0, s[:-1])))

    def record(self, quantity: str = "capacity") -> dict:
        return {
            "quantity": quantity,
            "sets": {k: [format_state(x) for x in v] for k, v in self.sets.items()},
            "truncation_sequence": list(self.truncations),
            "values": [float(v) for v in self.sequence],
            "residuals": [float(r) for r in self.residuals],
        }


def escape_probabilities(chain: FiniteChain, A, B, outside: str = "target"):
    """Pr_a[T_B < T_A^+] for a in A, on the chain's matrix.

    ``outside`` decides how the outside state counts: as part of ``B``
    ("target") or as a killing state that never reaches B ("avoid").
    """
    ia = chain.indices(A)
    ib = chain.indices(B)
    if np.intersect1d(ia, ib).size:
        raise ChainError("capacity sets overlap")
    tgt, avoid = ib, ia
    if chain.has_outside and chain.n not in ib:
        if outside == "target":
            tgt = np.append(ib, chain.n)
        elif outside == "avoid":
            avoid = np.append(ia, chain.n)
        else:
            raise ChainError(f"unknown outside rule {outside!r}")
    if tgt.size == 0:
        return np.zeros(len(ia)), 0.0
    P = chain.matrix
    e, resid = hitting_probability(P, tgt, avoid)
    esc = np.asarray(P[ia] @ e).ravel()
    return esc, resid


def capacity_between(chain: FiniteChain, pi: Measure, A, B=(), outside: str = "target") -> CapacityEstimate:
    """Cap(A, B) = sum_{a in A} pi(a) Pr_a[T_A^+ > T_B] on one finite chain.

    On a killed truncation the outside is joined to ``B`` by default, which is
    the truncated capacity Cap(A, B u V_m^c).
    """
    A, B = list(A), list(B)
    if not A:
        return CapacityEstimate(0.0, [0.0], [chain.n], {"A": A, "B": B}, [0.0])
    esc, resid = escape_probabilities(chain, A, B, outside)
    weights = np.array([pi(a) for a in A])
    val = float(weights @ esc)
    return CapacityEstimate(val, [val], [chain.n], {"A": A, "B": B}, [resid])


def capacity(chains, pi: Measure, C) -> CapacityEstimate:
    """Cap(C) via Cap(C, V_m^c) on each truncation in ``chains``.

    ``chains`` is a killed chain or an increasing sequence of them; the values
    are non-increasing along the sequence and the last one is reported.
    """
    if isinstance(chains, FiniteChain):
        chains = [chains]
    C = list(C)
    seq, resids, sizes = [], [], []
    for ch in chains:
        if not ch.has_outside:
            raise ChainError("capacity to infinity needs truncations with an outside state")
        missing = [x for x in C if x not in ch]
        if missing:
            raise ChainError(f"set not contained in truncation: {missing[:5]}")
        est = capacity_between(ch, pi, C, [])
        seq.append(est.value)
        resids += est.residuals
        sizes.append(ch.n)
    return CapacityEstimate(seq[-1], seq, sizes, {"C": C}, resids)


def reversed_capacity(chain: FiniteChain, pi: Measure, A, B=()) -> float:
    return capacity_between(time_reversal(chain, pi), pi, A, B).value


def symmetric_capacity(chain: FiniteChain, pi: Measure, A, B=()) -> float:
    return capacity_between(symmetrized_chain(chain, pi), pi, A, B).value


# --------------------------------------------------------------------------- energies

def dirichlet_energy(network: Network, f) -> float:
    """Sum over undirected edges of c(e) (f(u) - f(v))^2.

    This equals (1/2) sum_{x,y} pi(x) S(x,y) (f(x) - f(y))^2 for the walk on
    the network.  ``f`` is a mapping or an array in vertex order.
    """
    if isinstance(f, dict):
        fv = np.array([f.get(v, 0.0) for v in network.vertices], dtype=float)
    else:
        fv = np.asarray(f, dtype=float)
    W = sp.triu(network.W, k=1).tocoo()
    d = fv[W.row] - fv[W.col]
    return float(np.sum(W.data * d * d))


def minimal_energy(network: Network, A, B, return_potential: bool = False):
    """min Dirichlet energy over f with f = 1 on A and f = 0 on B.

    The minimiser is harmonic off A u B; vertices in components touching
    neither set are left at 0, which costs nothing.
    """
    idx_a = np.array([network.index(a) for a in A], dtype=np.int64)
    idx_b = np.array([network.index(b) for b in B], dtype=np.int64)
    n = len(network.vertices)
    if np.intersect1d(idx_a, idx_b).size:
        raise ChainError("energy boundary sets overlap")
    f = np.zeros(n)
    f[idx_a] = 1.0
    if idx_a.size == 0:
        return (0.0, f) if return_potential else 0.0
    fixed = np.zeros(n, dtype=bool)
    fixed[idx_a] = True
    fixed[idx_b] = True
    W = network.W
    live = _reaches(W, np.append(idx_a, idx_b)) & ~fixed
    free = np.flatnonzero(live)
    if free.size:
        deg = np.asarray(W[free].sum(axis=1)).ravel()
        L = sp.diags(deg) - W[free][:, free]
        rhs = np.asarray(W[free][:, idx_a].sum(axis=1)).ravel()
        f[free] = _solve(L.tocsr(), rhs)
    energy = dirichlet_energy(network, f)
    return (energy, f) if return_potential else energy


def network_capacity(network: Network, A, B=None) -> float:
    """Cap(A; c) toward ``B`` (default: the outside vertex)."""
    if B is None:
        B = [OUTSIDE] if OUTSIDE in network else []
    return minimal_energy(network, A, B)


def effective_resistance(network: Network, A, B) -> float:
    cap = minimal_energy(network, A, B)
    return np.inf if cap == 0 else 1.0 / cap


def _radius_of(radius: Callable):
    def r(v):
        return np.inf if v is OUTSIDE else radius(v)
    return r


def resistance_profile(network: Network, A, radius: Callable, radii: Sequence) -> np.ndarray:
    """R_eff(A <-> {radius >= R}) for each R; infinite where disconnected.

    Only the ball of radius R enters each solve; everything at radius >= R
    is grounded.
    """
    rad = _radius_of(radius)
    rv = np.array([rad(v) for v in network.vertices], dtype=float)
    ia = np.array([network.index(a) for a in A], dtype=np.int64)
    W = network.W.copy()
    # an edge of weight w changes a capacity by at most w; dropping the
    # underflowing ones keeps the Laplacian solvable
    if W.nnz:
        W.data[W.data < PRUNE_RTOL * W.data.max()] = 0.0
        W.eliminate_zeros()
    out = []
    for R in radii:
        inner = np.flatnonzero(rv < R)
        grounded = rv >= R
        if np.any(grounded[ia]):
            raise ChainError(f"radius {R} does not contain the source set")
        free = np.setdiff1d(inner, ia)
        f = np.zeros(len(rv))
        f[ia] = 1.0
        if free.size:
            sub = W[free]
            deg = np.asarray(sub.sum(axis=1)).ravel()
            live = deg > 0
            fl = free[live]
            if fl.size:
                L = sp.diags(deg[live]) - W[fl][:, fl]
                rhs = np.asarray(W[fl][:, ia].sum(axis=1)).ravel()
                f[fl] = _solve_laplacian(L.tocsr(), rhs)
        rows = W[ia]
        cap = float(np.sum(rows.multiply(1.0 - f[None, :]).sum(axis=1)))
        out.append(np.inf if cap <= 0 else 1.0 / cap)
    return np.array(out)


def _solve_laplacian(L, rhs):
    """Grounded Laplacian solve that tolerates components with no ground."""
    n = L.shape[0]
    ncomp, lab = sp.csgraph.connected_components(L, directed=False)
    x = np.zeros(n)
    if ncomp == 1:
        return _solve(L, rhs)
    diag = L.diagonal()
    offsum = np.asarray(abs(L).sum(axis=1)).ravel() - np.abs(diag)
    for c in range(ncomp):
        idx = np.flatnonzero(lab == c)
        if np.all(diag[idx] - offsum[idx] <= 1e-300) and np.all(rhs[idx] == 0):
            continue  # floating component, potential 0
        x[idx] = _solve(L[idx][:, idx].tocsr(), rhs[idx])
    return x


# --------------------------------------------------------------------------- level sets

@dataclass
class LevelSets:
    """Level sets of a voltage at ``delta`` and their boundary sets."""

    delta: float
    A: frozenset
    V: frozenset
    W: frozenset | None = None
    U: frozenset | None = None
    W_hat: frozenset | None = None
    U_hat: frozenset | None = None
    J: frozenset | None = None
    ties: frozenset = frozenset()


def level_sets(field: VoltageField, delta: float, region: Iterable | None = None,
               tie_tol: float = 1e-12, ties: str = "raise") -> LevelSets:
    """A = {v >= delta}, V = {v < delta} and, on a full classification, W, U, W_hat, U_hat, J.

    Membership needs the whole bracket on one side of ``delta`` (widened by
    ``tie_tol``).  With ``ties="snap"`` states within ``tie_tol`` of an exact
    value are treated as lying on the level (in A, not in W_hat); otherwise
    the call refuses with :class:`DeltaCollision`.  The boundary sets use the
    forward kernel of the chain the field was computed on, and the outside
    state counts as part of V.
    """
    if not 0 < delta < 1:
        raise ChainError("delta must lie in (0, 1)")
    chain = field.chain
    states = chain.states if region is None else list(region)
    A, V, tie = set(), set(), set()
    for x in states:
        lo, hi = field.bounds(x)
        if lo >= delta + tie_tol:
            A.add(x)
        elif hi < delta - tie_tol:
            V.add(x)
        elif ties == "snap" and hi - lo <= tie_tol:
            A.add(x)
            tie.add(x)
        else:
            raise DeltaCollision(
                f"delta={delta} collides with voltage bracket [{lo:.15g}, {hi:.15g}] at {x!r}")
    out = LevelSets(delta, frozenset(A), frozenset(V), ties=frozenset(tie))
    if region is not None:
        return out
    if chain.has_outside:
        V.add(OUTSIDE)
    P = chain.matrix
    labels = chain.labels
    vidx = np.array(sorted(chain.index(x) for x in V), dtype=np.int64)
    Vmask = np.zeros(chain.size, dtype=bool)
    Vmask[vidx] = True
    W, U = set(), set()
    for a in A:
        i = chain.index(a)
        lo, hi = P.indptr[i], P.indptr[i + 1]
        for j, p in zip(P.indices[lo:hi], P.data[lo:hi]):
            if p > 0 and Vmask[j]:
                W.add(a)
                U.add(labels[j])
    W_hat = {a for a in W if a not in tie and field.bounds(a)[0] > delta}
    J = set()
    for a in W_hat:
        i = chain.index(a)
        lo, hi = P.indptr[i], P.indptr[i + 1]
        for j, p in zip(P.indices[lo:hi], P.data[lo:hi]):
            if p > 0 and Vmask[j]:
                J.add((a, labels[j]))
    U_hat = {b for _, b in J}
    out.V = frozenset(V)
    out.W, out.U = frozenset(W), frozenset(U)
    out.W_hat, out.U_hat, out.J = frozenset(W_hat), frozenset(U_hat), frozenset(J)
    return out


# --------------------------------------------------------------------------- level-set capacity bounds

@dataclass
class LevelBound:
    """A capacity compared with an upper bound at one level ``delta``."""

    delta: float
    value: float
    bound: float
    level_set: frozenset
    truncation_change: float = 0.0

    def holds(self, tol: float = 1e-12) -> bool:
        """Bound met up to the truncation change and a relative rounding allowance ``tol``."""
        return self.value <= self.bound + self.truncation_change + tol * max(1.0, abs(self.bound))

    def as_dict(self) -> dict:
        return {"delta": self.delta, "value": self.value, "bound": self.bound,
                "truncation_change": self.truncation_change, "size": len(self.level_set),
                "holds": self.holds()}


def level_set_capacity(chains, pi: Measure, delta: float, o=None) -> LevelBound:
    """Cap({v_o >= delta}) against Cap(o)/delta on killed chains.

    ``chains`` is a killed chain or a sequence of growing truncations; the
    last one is the object and the change of Cap({v_o >= delta}) from the one
    before is reported as ``truncation_change``.
    """
    if isinstance(chains, FiniteChain):
        chains = [chains]
    vals = []
    for ch in chains:
        origin = ch.origin if o is None else o
        v = voltage(ch, [origin], outside="cemetery")
        A = frozenset(x for x, lo in zip(ch.states, v.lower) if lo >= delta)
        cap_A = capacity_between(ch, pi, A).value
        cap_o = capacity_between(ch, pi, [origin]).value
        vals.append((cap_A, cap_o, A))
    cap_A, cap_o, A = vals[-1]
    change = abs(vals[-1][0] - vals[-2][0]) if len(vals) > 1 else 0.0
    return LevelBound(delta, cap_A, cap_o / delta, A, change)


def expected_crossing_level_capacity(chain: FiniteChain, pi: Measure, delta: float, o=None,
                                     bound: float = 2.0) -> LevelBound:
    """Cap({v*_o >= delta}; E_o[N]) toward the outside, against the constant ``bound``."""
    o = chain.origin if o is None else o
    vs = voltage(chain, [o], "reversed", pi, outside="cemetery")
    A = frozenset(x for x, lo in zip(chain.states, vs.lower) if lo >= delta)
    net = expected_crossings(chain, o, pi, check_bound=False)
    return LevelBound(delta, network_capacity(net, A), bound, A)


def is_connected(chain: FiniteChain, subset) -> bool:
    """Whether the restriction of G(X) (undirected support) to ``subset`` is connected."""
    idx = chain.indices(subset)
    if idx.size <= 1:
        return True
    S = chain.matrix[idx][:, idx]
    S = ((S + S.T) != 0).astype(np.int8)
    ncomp, _ = sp.csgraph.connected_components(S, directed=False)
    return ncomp == 1


# --------------------------------------------------------------------------- output

def write_records(est: CapacityEstimate, json_path=None, csv_path=None, quantity="capacity"):
    rec = est.record(quantity)
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(rec, fh, indent=2)
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["truncation_index", "truncation_size", "value", "residual"])
            for i, (t, v) in enumerate(zip(rec["truncation_sequence"], rec["values"])):
                r = rec["residuals"][i] if i < len(rec["residuals"]) else ""
                w.writerow([i, t, repr(v), repr(r) if r != "" else ""])
    return rec


__all__ = [
    "BRACKET_TOL", "capacity", "capacity_between", "CapacityEstimate", "DeltaCollision",
    "dirichlet_energy", "effective_resistance", "escape_probabilities",
    "expected_crossing_level_capacity", "expected_crossings", "green_function",
    "green_identity_residual", "GreenTable", "hitting_probability", "is_connected",
    "level_set_capacity", "level_sets", "LevelBound", "LevelSets", "minimal_energy",
    "network_capacity", "NonTransient", "resistance_profile", "reversal_matrix",
    "reversed_capacity", "symmetric_capacity", "voltage", "voltage_ladder", "VoltageField",
    "write_records",
]
