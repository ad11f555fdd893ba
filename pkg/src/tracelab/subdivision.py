"""Edge subdivision at a reversed-voltage level.

Given a killed chain, a stationary measure and a level ``delta``, every
transition from a state with reversed voltage above ``delta`` to one below it
is split by an inserted state at which the reversed voltage of the new chain
is exactly ``delta``.  The new reversed kernel is built row by row; the
forward kernel is its time reversal.

The killed chain is first closed: the outside state gets the return row that
makes the extended measure stationary (see
:func:`tracelab.chain_core.close_chain`).  Voltages and Green functions still
treat the outside as a killing state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .chain_core import (OUTSIDE, ChainError, FiniteChain, Measure, close_chain, format_state,
                         reversal_matrix, strip_holding)
from .potential import DeltaCollision, VoltageField, hitting_probability, level_sets


@dataclass(frozen=True)
class Mid:
    """State inserted on the edge {a, b}; ``Mid(a, b)`` and ``Mid(b, a)`` coincide."""

    a: object
    b: object

    def __eq__(self, other):
        return isinstance(other, Mid) and {self.a, self.b} == {other.a, other.b}

    def __hash__(self):
        return hash(("mid", frozenset((self.a, self.b))))

    def __repr__(self):
        return f"z({format_state(self.a)}|{format_state(self.b)})"


# --------------------------------------------------------------------------- level data

@dataclass
class LevelData:
    """Level sets of the reversed voltage v* of the origin on a closed chain.

    ``labels``/``P``/``Pstar``/``pi`` describe the holding-free closed chain
    (outside last); ``vstar`` is indexed the same way with v*(outside) = 0.
    """

    delta: float
    origin: object
    labels: list
    P: sp.csr_matrix
    Pstar: sp.csr_matrix
    pi: np.ndarray
    vstar: np.ndarray
    A: frozenset
    V: frozenset
    W: frozenset
    U: frozenset
    W_hat: frozenset
    U_hat: frozenset
    J: list
    D: frozenset
    ties: frozenset = frozenset()
    index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.index = {x: i for i, x in enumerate(self.labels)}

    def v(self, x) -> float:
        return float(self.vstar[self.index[x]])


def _closed_reversal(chain: FiniteChain, pi: Measure):
    killed, pi_s = strip_holding(chain, pi)
    closed, piv = close_chain(killed, pi_s)
    return killed, closed, piv, reversal_matrix(closed, piv)


def reversed_voltage(chain: FiniteChain, pi: Measure, o=None) -> dict:
    """v*(x) = Pr*_x[hit o before the outside] on the interior states."""
    o = chain.origin if o is None else o
    killed, _, _, Pstar = _closed_reversal(chain, pi)
    v, _ = hitting_probability(Pstar, [killed.index(o)], [killed.n])
    return dict(zip(killed.states, v[:killed.n]))


def level_data(chain: FiniteChain, pi: Measure, o=None, delta: float = 0.5,
               on_tie: str = "raise", tie_tol: float = 1e-12) -> LevelData:
    """Sets A*, V*, W*, U*, W_hat, U_hat, J and D at level ``delta``.

    ``on_tie="snap"`` accepts states whose v* is within ``tie_tol`` of
    ``delta`` and treats them as lying exactly on the level (in A*, never in
    W_hat); the default refuses with :class:`DeltaCollision`.
    """
    if not chain.has_outside or chain.matrix[chain.n, chain.n] != 1.0:
        raise ChainError("subdivision needs a killed chain (absorbing outside state)")
    if on_tie not in ("raise", "snap"):
        raise ChainError(f"unknown tie rule {on_tie!r}")
    o = chain.origin if o is None else o
    killed, closed, piv, Pstar = _closed_reversal(chain, pi)
    n = killed.n
    v, _ = hitting_probability(Pstar, [killed.index(o)], [n])
    field_ = VoltageField(killed, frozenset([o]), v[:n], v[:n], "reversed")
    ls = level_sets(field_, delta, tie_tol=tie_tol, ties=on_tie)
    J = sorted(ls.J, key=lambda ab: (killed.index(ab[0]), killed.index(ab[1])))
    labels = killed.labels
    idx = {x: i for i, x in enumerate(labels)}
    D = frozenset(w for w in ls.W_hat
                  if not any(a == w and Pstar[idx[a], idx[b]] > 0 for a, b in J))
    return LevelData(delta, o, labels, closed.matrix.tocsr(), Pstar, piv, v, ls.A, ls.V, ls.W, ls.U,
                     ls.W_hat, ls.U_hat, J, D, ls.ties)


# --------------------------------------------------------------------------- construction

@dataclass
class AuxChain:
    """Subdivided chain: states V u Z with kernels P_hat, P_hat* and measure pi_hat."""

    level: LevelData
    labels: list
    P: sp.csr_matrix
    Pstar: sp.csr_matrix
    pi: np.ndarray
    beta: np.ndarray
    L: dict
    anchors: dict
    mid_index: dict

    @property
    def n_original(self) -> int:
        return len(self.level.labels)

    @property
    def Z(self) -> list:
        return self.labels[self.n_original:]

    @property
    def outside_index(self) -> int:
        return self.n_original - 1

    def index(self, x) -> int:
        if isinstance(x, Mid):
            return self.mid_index[x]
        return self.level.index[x]

    def prob(self, x, y, reversed_: bool = False) -> float:
        M = self.Pstar if reversed_ else self.P
        return float(M[self.index(x), self.index(y)])

    def vstar(self) -> np.ndarray:
        """Reversed voltage of the origin on the aux chain, outside killed."""
        v, _ = hitting_probability(self.Pstar, [self.index(self.level.origin)], [self.outside_index])
        return v


def _split_probabilities(lv: LevelData, a_i: int, b_i: int) -> tuple[float, float]:
    """(P_hat*(z, a), P_hat*(z, b)) for a pair (a, b) in J."""
    va, vb, d = lv.vstar[a_i], lv.vstar[b_i], lv.delta
    if not va > d > vb:
        raise ChainError("subdivided pair does not straddle delta")
    return (d - vb) / (va - vb), (va - d) / (va - vb)


def build_aux(chain: FiniteChain | LevelData, pi: Measure | None = None, o=None, delta: float = 0.5,
              on_tie: str = "raise") -> AuxChain:
    """Construct the subdivided chain.

    ``chain`` may be a precomputed :class:`LevelData`.  Anchors are the
    smallest admissible partner in state order.
    """
    lv = chain if isinstance(chain, LevelData) else level_data(chain, pi, o, delta, on_tie)
    n = len(lv.labels)
    idx = lv.index
    Ps = lv.Pstar.tolil()
    J = [(idx[a], idx[b]) for a, b in lv.J]
    nz = len(J)
    N = n + nz
    zi = {pair: n + k for k, pair in enumerate(J)}
    z_of = {}
    for (a, b), k in zi.items():
        z_of[(a, b)] = k
        z_of[(b, a)] = k
    Wh = {idx[a] for a in lv.W_hat}
    Uh = {idx[b] for b in lv.U_hat}
    Dset = {idx[d] for d in lv.D}
    Jset = set(J)
    to_a, to_b = {}, {}
    for a, b in J:
        to_a[(a, b)], to_b[(a, b)] = _split_probabilities(lv, a, b)

    H = sp.lil_matrix((N, N))
    rows = {i: dict(zip(Ps.rows[i], Ps.data[i])) for i in range(n)}
    L, anchors = {}, {}
    for x in range(n):
        r = rows[x]
        if x in Wh and x not in Dset:
            partners = sorted(b for (a, b) in J if a == x)
            b0 = min(b for b in partners if r.get(b, 0.0) > 0)
            La = sum(p for y, p in r.items() if (x, y) not in Jset)
            La += sum(r.get(y, 0.0) / to_b[(x, y)] for y in partners)
            L[lv.labels[x]] = La
            anchors[lv.labels[x]] = lv.labels[b0]
            for y, p in r.items():
                if (x, y) in Jset:
                    if p > 0:
                        H[x, z_of[(x, y)]] = p / (La * to_b[(x, y)])
                elif p > 0:
                    H[x, y] = p / La
        elif x in Uh:
            partners = sorted(a for (a, b) in J if b == x)
            a0 = min(a for a in partners if r.get(a, 0.0) > 0)
            Lb = sum(p for y, p in r.items() if y not in Wh)
            Lb += sum(r.get(y, 0.0) / to_a[(y, x)] for y in partners)
            L[lv.labels[x]] = Lb
            anchors[lv.labels[x]] = lv.labels[a0]
            for y, p in r.items():
                if (y, x) in Jset:
                    if p > 0:
                        H[x, z_of[(y, x)]] = p / (Lb * to_a[(y, x)])
                elif y in Wh and p > 0:
                    raise ChainError("reversed edge into W_hat outside J")
                elif p > 0:
                    H[x, y] = p / Lb
        else:
            for y, p in r.items():
                if p > 0:
                    H[x, y] = p
    for (a, b), k in zi.items():
        H[k, a] = to_a[(a, b)]
        H[k, b] = to_b[(a, b)]
    Hs = H.tocsr()

    beta = np.zeros(n)
    for (a, b), k in zi.items():
        beta[a] += Hs[a, k] * Hs[k, a]
        beta[b] += Hs[b, k] * Hs[k, b]
    pih = np.zeros(N)
    pih[:n] = lv.pi
    touched = np.array(sorted(Wh | Uh), dtype=np.int64)
    pih[touched] = lv.pi[touched] / (1.0 - beta[touched])
    for (a, b), k in zi.items():
        pih[k] = pih[a] * Hs[a, k] + pih[b] * Hs[b, k]
    P = (sp.diags(1.0 / pih) @ Hs.T @ sp.diags(pih)).tocsr()
    P.eliminate_zeros()
    labels = list(lv.labels) + [Mid(lv.labels[a], lv.labels[b]) for a, b in J]
    mid_index = {labels[k]: k for k in range(n, N)}
    return AuxChain(lv, labels, P, Hs, pih, beta, L, anchors, mid_index)


# --------------------------------------------------------------------------- verification

@dataclass
class PropertyReport:
    """Maximum absolute deviation per checked property."""

    deviations: dict
    split_inside: bool
    L_bound_ok: bool

    def max(self) -> float:
        return max(self.deviations.values()) if self.deviations else 0.0

    def ok(self, tol: float = 1e-10) -> bool:
        return self.split_inside and self.L_bound_ok and all(v <= tol for v in self.deviations.values())

    def as_dict(self) -> dict:
        return {**{k: float(v) for k, v in self.deviations.items()},
                "split_inside": self.split_inside, "L_bound_ok": self.L_bound_ok}


def _green_row(M: sp.csr_matrix, start: int, killed: np.ndarray) -> np.ndarray:
    """Expected visits from ``start`` before entering the ``killed`` mask."""
    free = np.flatnonzero(~killed)
    pos = {int(f): i for i, f in enumerate(free)}
    A = sp.identity(free.size, format="csc") - M[free][:, free].tocsc()
    e = np.zeros(free.size)
    e[pos[start]] = 1.0
    g = sp.linalg.spsolve(A.T.tocsc(), e)
    out = np.zeros(M.shape[0])
    out[free] = g
    return out


def _exit_table(M: sp.csr_matrix, x: int, n: int, N: int):
    """Green row of x for the walk stopped on entering V minus {x}."""
    killed = np.zeros(N, dtype=bool)
    killed[:n] = True
    killed[x] = False
    return _green_row(M, x, killed)


def exit_distribution(aux: AuxChain, x) -> dict:
    """Law of the first state of V other than ``x`` visited by the aux chain from ``x``."""
    n, N = aux.n_original, len(aux.labels)
    i = aux.index(x)
    g = _exit_table(aux.P, i, n, N)
    law = g @ aux.P.toarray()
    return {aux.labels[y]: float(law[y]) for y in range(n) if y != i and law[y] > 0}


def _crossing_means(M: sp.csr_matrix, origin: int, out: int) -> sp.csr_matrix:
    killed = np.zeros(M.shape[0], dtype=bool)
    killed[out] = True
    g = _green_row(M, origin, killed)
    F = sp.diags(g) @ M
    return (F + F.T).tocsr()


def verify_properties(aux: AuxChain, tol_L: float = 1e-12) -> PropertyReport:
    """Check the construction by exact linear algebra.

    Deviations reported: reversed voltage kept on V and equal to delta on the
    midpoints, midpoint rows, exit laws from V, expected crossings,
    stationarity and duality, untouched rows, and edge fluxes through
    midpoints.
    """
    lv = aux.level
    n, N = aux.n_original, len(aux.labels)
    P, Ps, pih = aux.P, aux.Pstar, aux.pi
    Po, pio = lv.P, lv.pi
    out = aux.outside_index
    dev = {}
    J = [(lv.index[a], lv.index[b]) for a, b in lv.J]
    z_of = {}
    for k, (a, b) in enumerate(J):
        z_of[(a, b)] = z_of[(b, a)] = n + k

    vh = aux.vstar()
    dev["voltage_kept"] = float(np.abs(vh[:n] - lv.vstar).max())
    dev["voltage_on_mid"] = float(np.abs(vh[n:] - lv.delta).max()) if N > n else 0.0
    sb = 0.0
    for (a, b) in J:
        k = z_of[(a, b)]
        for M in (P, Ps):
            sb = max(sb, abs(M[k, a] + M[k, b] - 1.0))
            col = M[:, k].toarray().ravel()
            col[[a, b]] = 0.0
            sb = max(sb, float(np.abs(col).max()))
    dev["mid_rows"] = sb

    # exit law from x on first entrance to V \ {x}
    d1 = d2 = 0.0
    Pd = Po.toarray()
    for x in range(n):
        g = _exit_table(P, x, n, N)
        free = g != 0
        exit_law = g[free] @ P[free].toarray()
        for y in range(n):
            if y == x:
                continue
            d1 = max(d1, abs(exit_law[y] - Pd[x, y]))
        for (a, b) in J:
            if x == a:
                y, k = b, z_of[(a, b)]
            elif x == b:
                y, k = a, z_of[(a, b)]
            else:
                continue
            d2 = max(d2, abs(g[k] * P[k, y] - Pd[x, y]))
    dev["exit_law"], dev["direct_passage"] = d1, d2

    # expected crossings before absorption at the outside
    o = lv.index[lv.origin]
    EN = _crossing_means(Po, o, out)
    ENh = _crossing_means(P, o, out)
    jpairs = {frozenset(p) for p in J}
    e_eq = e_ge = 0.0
    Ec = EN.tocoo()
    for x, y, w in zip(Ec.row, Ec.col, Ec.data):
        if x >= y:
            continue
        if frozenset((x, y)) in jpairs:
            continue
        e_eq = max(e_eq, abs(ENh[x, y] - w) / max(1.0, w))
    for (a, b) in J:
        k = z_of[(a, b)]
        e_ge = max(e_ge, max(0.0, EN[a, b] - ENh[k, b]))
    dev["crossings_kept"], dev["crossings_split"] = e_eq, e_ge

    # stationarity, duality, stochasticity
    dev["stationary"] = float(np.abs(pih @ P - pih).max() / pih.max())
    dev["stationary_reversed"] = float(np.abs(pih @ Ps - pih).max() / pih.max())
    flux = sp.diags(pih) @ P - (sp.diags(pih) @ Ps).T
    dev["duality"] = float(abs(flux).max() / pih.max()) if flux.nnz else 0.0
    dev["rows"] = float(max(np.abs(np.asarray(P.sum(axis=1)).ravel() - 1).max(),
                            np.abs(np.asarray(Ps.sum(axis=1)).ravel() - 1).max()))

    # untouched rows agree with P and never enter Z
    touched = {lv.index[x] for x in lv.W_hat | lv.U_hat}
    g_dev = 0.0
    Pdense = P.toarray()
    for x in range(n):
        if x in touched:
            continue
        g_dev = max(g_dev, float(np.abs(Pdense[x, :n] - Pd[x]).max()), float(np.abs(Pdense[x, n:]).max(initial=0.0)))
    dev["untouched_rows"] = g_dev

    # flux through each midpoint equals the original edge flux
    h = 0.0
    for (a, b) in J:
        k = z_of[(a, b)]
        h = max(h, abs(pih[a] * P[a, k] * P[k, b] - pio[a] * Pd[a, b]) / pio.max())
        h = max(h, abs(pih[b] * P[b, k] * P[k, a] - pio[b] * Pd[b, a]) / pio.max())
    fl = pih[:n, None] * Pdense[:n, :n] - pio[:, None] * Pd
    for (a, b) in J:
        fl[a, b] = fl[b, a] = 0.0
    h = max(h, float(np.abs(fl).max() / pio.max()))
    dev["edge_flux"] = h

    inside = all(0 < aux.Pstar[k, a] < 1 and 0 < aux.Pstar[k, b] < 1
                 for (a, b), k in ((p, z_of[p]) for p in J))
    L_ok = all(L <= lv.v(x) / (lv.v(x) - lv.delta) + tol_L for x, L in aux.L.items() if x in lv.W_hat)
    return PropertyReport(dev, inside, L_ok)


# --------------------------------------------------------------------------- remark sets

@dataclass
class RemarkSets:
    Z_hat: frozenset
    above: frozenset
    below: frozenset
    identities: dict

    @property
    def ok(self) -> bool:
        return all(self.identities.values())


def remark_sets(aux: AuxChain, tol: float = 1e-10) -> RemarkSets:
    """Partition of the aux states by v_hat* against delta, with the expected identities."""
    lv = aux.level
    vh = aux.vstar()
    d = lv.delta
    labels = aux.labels
    Zh = frozenset(labels[i] for i in range(len(labels)) if abs(vh[i] - d) <= tol)
    above = frozenset(labels[i] for i in range(len(labels)) if vh[i] > d + tol)
    below = frozenset(labels[i] for i in range(len(labels)) if vh[i] < d - tol)
    ids = {
        "above": above == lv.A - (lv.W - lv.W_hat),
        "below": below == lv.V,
        "level": Zh == frozenset(aux.Z) | (lv.W - lv.W_hat),
    }
    P = aux.P.tocoo()
    ai = {aux.index(x) for x in above}
    bi = {aux.index(x) for x in below}
    ids["no_crossing"] = not any(p > 0 and i in ai and j in bi for i, j, p in zip(P.row, P.col, P.data))
    return RemarkSets(Zh, above, below, ids)


# --------------------------------------------------------------------------- export

def export(aux: AuxChain, prefix) -> dict:
    """Write ``prefix.P.txt`` and ``prefix.Pstar.txt`` triples plus ``prefix.json``."""
    prefix = Path(prefix)
    names = [repr(x) if isinstance(x, Mid) else format_state(x) for x in aux.labels]
    for tag, M in (("P", aux.P), ("Pstar", aux.Pstar)):
        C = M.tocoo()
        order = np.lexsort((C.col, C.row))
        with open(f"{prefix}.{tag}.txt", "w", encoding="utf-8") as fh:
            for k in order:
                fh.write(f"{names[C.row[k]]} {names[C.col[k]]} {float(C.data[k])!r}\n")
    lv = aux.level
    meta = {
        "delta": lv.delta,
        "J": [[format_state(a), format_state(b)] for a, b in lv.J],
        "D": sorted(format_state(x) for x in lv.D),
        "Z": names[aux.n_original:],
        "pi_hat": {names[i]: float(aux.pi[i]) for i in range(len(names))},
        "beta": {names[i]: float(aux.beta[i]) for i in range(aux.n_original)},
        "ties": sorted(format_state(x) for x in lv.ties),
    }
    with open(f"{prefix}.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    return meta


__all__ = ["AuxChain", "DeltaCollision", "LevelData", "Mid", "PropertyReport", "RemarkSets",
           "build_aux", "exit_distribution", "export", "level_data", "remark_sets", "reversed_voltage", "verify_properties"]
