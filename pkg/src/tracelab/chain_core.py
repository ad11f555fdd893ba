"""Countable-state Markov chains, finite truncations and their basic transforms.

A chain is described lazily by a :class:`TransitionKernel` (row access per
state).  Exact computations run on a :class:`FiniteChain`, obtained by
truncating the kernel to a finite set of states; everything outside the set
is collapsed into a single extra state (see :data:`OUTSIDE`).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

ROW_TOL = 1e-12
STATIONARY_TOL = 1e-10


class ChainError(ValueError):
    """Raised for malformed chains, measures or truncations."""


class _Outside:
    """Sentinel for the collapsed exterior of a truncation."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OUT"

    def __reduce__(self):
        return (_Outside, ())


OUTSIDE = _Outside()

KILLED = "killed"
IDENTIFIED = "identified"


class TransitionKernel:
    """Lazy row-stochastic transition rule.

    Parameters
    ----------
    row : callable
        ``row(x)`` returns a finite list of ``(y, p)`` pairs.
    origin : hashable
        Designated starting state.
    radius : callable, optional
        Size function used by integer truncation horizons.
    name : str
    """

    def __init__(self, row: Callable, origin: Hashable, radius: Callable | None = None,
                 name: str = "kernel"):
        self._row = row
        self.origin = origin
        self.radius = radius
        self.name = name

    def row(self, x):
        return self._row(x)

    def support(self, x):
        return [y for y, p in self._row(x) if p > 0]

    def __repr__(self):
        return f"TransitionKernel({self.name!r}, origin={self.origin!r})"


def _up_probability(omega: Callable[[int], float], k: int, log: bool) -> float:
    """P(k, k+1) of the birth-death chain with edge weights ``omega``."""
    if k == 0:
        return 1.0
    if log:
        return 1.0 / (1.0 + math.exp(omega(k - 1) - omega(k)))
    up, down = omega(k), omega(k - 1)
    return up / (up + down)


def birth_death_kernel(omega: Callable[[int], float], name: str = "birth-death",
                       log: bool = False) -> TransitionKernel:
    """Nearest-neighbour chain on {0,1,...} with edge weights ``omega(k)`` on (k, k+1).

    With ``log=True``, ``omega`` returns log-weights (safe for weights that overflow).
    """

    def row(k):
        up = _up_probability(omega, k, log)
        return [(k + 1, up)] if k == 0 else [(k + 1, up), (k - 1, 1 - up)]

    return TransitionKernel(row, 0, radius=abs, name=name)


def line_walk_kernel(p_up: float, name: str | None = None) -> TransitionKernel:
    """Walk on Z stepping +1 with probability ``p_up`` and -1 otherwise."""
    q = 1.0 - p_up

    def row(i):
        return [(i + 1, p_up), (i - 1, q)]

    return TransitionKernel(row, 0, radius=abs, name=name or f"line-walk(p={p_up:g})")


def cycle_lift_kernel(omega: Callable[[int], float], period: int = 3,
                      rotate: float = 0.5, log: bool = False) -> TransitionKernel:
    """Birth-death chain times a directed cycle.

    From ``(k, j)`` the chain rotates ``j -> j+1 (mod period)`` with probability
    ``rotate`` and otherwise makes a birth-death move in ``k``.  The product of
    the birth-death measure with the uniform measure on the cycle is
    stationary, and the chain is not reversible when ``rotate > 0``.
    ``log`` is as in :func:`birth_death_kernel`.
    """
    radial = 1.0 - rotate

    def row(x):
        k, j = x
        up = _up_probability(omega, k, log)
        out = [((k, (j + 1) % period), rotate), ((k + 1, j), radial * up)]
        if k > 0:
            out.append(((k - 1, j), radial * (1 - up)))
        return out

    return TransitionKernel(row, (0, 0), radius=lambda x: x[0],
                            name=f"cycle-lift(period={period})")


def _sorted_states(states):
    try:
        return sorted(states)
    except TypeError:
        return list(states)


@dataclass(frozen=True)
class FiniteChain:
    """Explicit finite chain.

    ``states`` lists the interior states.  When ``mode`` is not ``None`` an
    extra state :data:`OUTSIDE` sits at index ``len(states)``; it is the
    cemetery (``killed``) or the boundary vertex (``identified``).  Its row is
    absorbing unless a return row was attached by :func:`close_chain`.
    """

    states: tuple
    matrix: sp.csr_matrix
    origin: Hashable
    mode: str | None = KILLED
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        index = {x: i for i, x in enumerate(self.states)}
        if self.mode is not None:
            index[OUTSIDE] = len(self.states)
        object.__setattr__(self, "_index", index)
        if self.origin not in index:
            raise ChainError(f"origin {self.origin!r} is not a state of the chain")

    @classmethod
    def from_matrix(cls, matrix, states: Sequence | None = None, origin=None,
                    mode: str | None = None) -> "FiniteChain":
        """Wrap a square transition matrix.

        With ``mode`` set, the last row/column is taken as the outside state.
        """
        m = sp.csr_matrix(matrix, dtype=float)
        n_total = m.shape[0]
        n = n_total - (1 if mode is not None else 0)
        states = tuple(range(n)) if states is None else tuple(states)
        if len(states) != n:
            raise ChainError("state list does not match matrix size")
        return cls(states, m, states[0] if origin is None else origin, mode)

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def has_outside(self) -> bool:
        return self.mode is not None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def labels(self) -> list:
        return list(self.states) + ([OUTSIDE] if self.has_outside else [])

    def index(self, x) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise ChainError(f"state {x!r} not in chain") from None

    def indices(self, xs: Iterable) -> np.ndarray:
        return np.array([self.index(x) for x in xs], dtype=np.int64)

    def __contains__(self, x) -> bool:
        return x in self._index

    def row(self, x) -> list:
        i = self.index(x)
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        labels = self.labels
        return [(labels[j], p) for j, p in zip(self.matrix.indices[lo:hi], self.matrix.data[lo:hi])]

    def prob(self, x, y) -> float:
        return float(self.matrix[self.index(x), self.index(y)])

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def with_matrix(self, matrix) -> "FiniteChain":
        return FiniteChain(self.states, sp.csr_matrix(matrix), self.origin, self.mode)


def truncate(kernel: TransitionKernel, horizon, mode: str = KILLED,
             max_states: int = 2_000_000) -> FiniteChain:
    """Restrict ``kernel`` to the states reachable from the origin inside ``horizon``.

    ``horizon`` is either a predicate on states or a number ``R``, meaning
    ``kernel.radius(x) <= R``.  Transitions leaving the kept set are redirected
    to :data:`OUTSIDE`.
    """
    if mode not in (KILLED, IDENTIFIED):
        raise ChainError(f"unknown boundary mode {mode!r}")
    if callable(horizon):
        keep = horizon
    else:
        if kernel.radius is None:
            raise ChainError("numeric horizon needs a kernel radius function")
        bound = horizon
        keep = lambda x: kernel.radius(x) <= bound  # noqa: E731
    o = kernel.origin
    if not keep(o):
        raise ChainError("truncation horizon excludes the origin")

    seen = {o}
    queue = deque([o])
    rows = {}
    while queue:
        x = queue.popleft()
        r = [(y, p) for y, p in kernel.row(x) if p > 0]
        rows[x] = r
        for y, _ in r:
            if y not in seen and keep(y):
                seen.add(y)
                queue.append(y)
                if len(seen) > max_states:
                    raise ChainError("truncation exceeds max_states; is the horizon finite?")
    states = tuple(_sorted_states(seen))
    index = {x: i for i, x in enumerate(states)}
    out = len(states)
    ri, ci, vals = [], [], []
    for x in states:
        i = index[x]
        for y, p in rows[x]:
            ri.append(i)
            ci.append(index.get(y, out))
            vals.append(p)
    ri.append(out)
    ci.append(out)
    vals.append(1.0)
    m = sp.csr_matrix((vals, (ri, ci)), shape=(out + 1, out + 1))
    m.sum_duplicates()
    return FiniteChain(states, m, o, mode)


# --------------------------------------------------------------------------- measures

class Measure:
    """Unnormalised positive measure on states.

    Built either from a callable (lazy, for infinite chains) or from an
    explicit mapping.  ``residual`` records the stationarity residual when the
    measure came out of a solve.
    """

    def __init__(self, weight: Callable | dict, residual: float | None = None,
                 stationary: bool = False, name: str = "measure"):
        if isinstance(weight, dict):
            table = dict(weight)
            self._fn = table.__getitem__
            self.table = table
        else:
            self._fn = weight
            self.table = None
        self.residual = residual
        self.stationary = stationary
        self.name = name

    def __call__(self, x) -> float:
        return float(self._fn(x))

    def __getitem__(self, x) -> float:
        return self(x)

    def vector(self, chain: FiniteChain) -> np.ndarray:
        """Weights on the interior states of ``chain``, in chain order."""
        vec = np.array([self(x) for x in chain.states], dtype=float)
        if np.any(~np.isfinite(vec)) or np.any(vec <= 0):
            raise ChainError(f"{self.name}: weight must be positive on every interior state")
        return vec

    def __repr__(self):
        return f"Measure({self.name!r}, residual={self.residual})"


def bd_measure(omega: Callable[[int], float]) -> Measure:
    """Closed-form stationary measure pi(i) = omega(i-1,i) + omega(i,i+1)."""

    def weight(i):
        return omega(i) + (omega(i - 1) if i > 0 else 0.0)

    return Measure(weight, residual=0.0, stationary=True, name="birth-death")


def counting_measure() -> Measure:
    return Measure(lambda x: 1.0, stationary=True, name="counting")


def stationary_measure(chain, tol: float = STATIONARY_TOL) -> Measure:
    """Stationary measure of a finite chain, or closed form for birth-death weights.

    For a :class:`FiniteChain` without outside state the left null vector of
    ``I - P`` is computed by a sparse solve with one equation replaced by a
    normalisation; with an outside state the outside must carry a return row
    (see :func:`close_chain`).  ``chain`` may also be a weight function
    ``omega(k)``, in which case :func:`bd_measure` is returned.
    """
    if not isinstance(chain, FiniteChain):
        if callable(chain):
            return bd_measure(chain)
        raise ChainError("stationary_measure needs a FiniteChain or birth-death weights")
    P = chain.matrix
    n = P.shape[0]
    if chain.has_outside and P[n - 1, n - 1] == 1.0:
        raise ChainError("outside state is absorbing; the interior has no stationary measure")
    _check_irreducible(P)
    o = chain.index(chain.origin)
    A = (sp.identity(n, format="csr") - P).T.tolil()
    A[o, :] = 0.0
    A[o, o] = 1.0
    b = np.zeros(n)
    b[o] = 1.0
    pi = _solve(A.tocsr(), b)
    if np.any(pi <= 0):
        raise ChainError("stationary solve returned non-positive mass")
    resid = float(np.abs(pi @ P - pi).max() / pi.max())
    if resid > tol:
        raise ChainError(f"stationary solve residual {resid:.3e} above {tol:.1e}")
    labels = chain.labels
    return Measure(dict(zip(labels, pi)), residual=resid, stationary=True, name="solved")


def _check_irreducible(P):
    ncomp, _ = sp.csgraph.connected_components(P, directed=True, connection="strong")
    if ncomp != 1:
        raise ChainError(f"chain is reducible ({ncomp} communicating classes)")


def _solve(A, b):
    if A.shape[0] <= 50_000:
        return spla.spsolve(sp.csc_matrix(A), b)
    x, info = spla.gmres(A, b, rtol=1e-12, restart=200, maxiter=2000)
    if info != 0:
        raise ChainError(f"iterative solve did not converge (info={info})")
    return x


# --------------------------------------------------------------------------- transforms

def reversal_matrix(chain: FiniteChain, pi: Measure | np.ndarray, tol: float = 1e-9) -> sp.csr_matrix:
    """Matrix of the time reversal, with the interior deficit routed to the outside."""
    piv = pi if isinstance(pi, np.ndarray) else _pi_all(chain, pi)
    n = chain.n
    P = chain.matrix
    if chain.has_outside and P[n, n] != 1.0:
        # closed chain: the outside carries real mass
        D = sp.diags(piv)
        Dinv = sp.diags(1.0 / piv)
        R = (Dinv @ P.T @ D).tocsr()
        _check_rows(R, tol, "time reversal (measure not stationary?)")
        return R
    Pin = P[:n, :n]
    D = sp.diags(piv[:n])
    Dinv = sp.diags(1.0 / piv[:n])
    Rin = (Dinv @ Pin.T @ D).tocsr()
    deficit = 1.0 - np.asarray(Rin.sum(axis=1)).ravel()
    if np.any(deficit < -tol):
        raise ChainError(f"measure is not excessive: reversal row sum exceeds 1 by {-deficit.min():.2e}")
    deficit = np.clip(deficit, 0.0, None)
    if not chain.has_outside:
        if np.any(deficit > tol):
            raise ChainError(f"measure is not stationary: reversal rows short by {deficit.max():.2e}")
        return Rin
    out = sp.lil_matrix((n + 1, n + 1))
    out[:n, :n] = Rin
    out[:n, n] = deficit.reshape(-1, 1)
    out[n, n] = 1.0
    R = out.tocsr()
    R.eliminate_zeros()
    return R


def _pi_all(chain: FiniteChain, pi: Measure) -> np.ndarray:
    vec = pi.vector(chain)
    if chain.has_outside and chain.matrix[chain.n, chain.n] != 1.0:
        vec = np.append(vec, pi(OUTSIDE))
    return vec


def _check_rows(M, tol, what):
    s = np.asarray(M.sum(axis=1)).ravel()
    if np.abs(s - 1).max() > tol:
        raise ChainError(f"{what}: row sums deviate by {np.abs(s - 1).max():.2e}")


def time_reversal(chain: FiniteChain, pi: Measure) -> FiniteChain:
    """P*(x,y) = pi(y) P(y,x) / pi(x).

    On a killed truncation the reversal of the interior block is
    sub-stochastic (mass flowing in from beyond the truncation); the missing
    mass is sent to the outside state, which keeps the operation an involution.
    """
    return chain.with_matrix(reversal_matrix(chain, pi))


def symmetrized_chain(chain: FiniteChain, pi: Measure) -> FiniteChain:
    """Chain with kernel S = (P + P*) / 2."""
    R = reversal_matrix(chain, pi)
    return chain.with_matrix(0.5 * (chain.matrix + R))


def close_chain(chain: FiniteChain, pi: Measure, tol: float = 1e-9) -> tuple[FiniteChain, np.ndarray]:
    """Turn a killed chain into a closed one by giving the outside a return row.

    The outside receives mass pi(OUT) = sum_x pi(x) P(x, OUT) and re-enters
    state x with probability pi(x) P*(x, OUT) / pi(OUT).  If ``pi`` is the
    restriction of a stationary measure of the untruncated chain, the extended
    measure is stationary for the closed chain.

    Returns the closed chain and the extended measure vector.
    """
    if not chain.has_outside:
        raise ChainError("close_chain needs a chain with an outside state")
    n = chain.n
    piv = pi.vector(chain)
    P = chain.matrix.tolil()
    R = reversal_matrix(chain, pi, tol=tol)
    inflow = piv * R[:n, n].toarray().ravel()
    outflow = piv * P[:n, n].toarray().ravel()
    mass = outflow.sum()
    if mass <= 0:
        raise ChainError("chain never reaches the outside; nothing to close")
    if abs(inflow.sum() - mass) > tol * max(1.0, mass) * 1e3:
        raise ChainError(f"inflow {inflow.sum():.6g} and outflow {mass:.6g} of the outside disagree")
    P[n, :] = 0.0
    P[n, :n] = (inflow / inflow.sum()).reshape(1, -1)
    closed = chain.with_matrix(P.tocsr())
    closed.matrix.eliminate_zeros()
    return closed, np.append(piv, mass)


def strip_holding(chain: FiniteChain, pi: Measure | None = None):
    """Remove holding: P'(x,y) = P(x,y) 1{x != y} / (1 - P(x,x)).

    The matching stationary measure is pi'(x) = pi(x)(1 - P(x,x)); it is
    returned alongside when ``pi`` is given.  The outside row is left alone.
    """
    P = chain.matrix.tolil(copy=True)
    n = chain.n
    hold = np.array([P[i, i] for i in range(n)])
    if np.any(hold >= 1.0):
        raise ChainError("state with holding probability 1 cannot be stripped")
    for i in range(n):
        P[i, i] = 0.0
    scale = sp.diags(np.append(1.0 / (1.0 - hold), [1.0] * (chain.size - n)))
    stripped = chain.with_matrix((scale @ P.tocsr()).tocsr())
    stripped.matrix.eliminate_zeros()
    if pi is None:
        return stripped
    table = {x: pi(x) * (1.0 - h) for x, h in zip(chain.states, hold)}
    return stripped, Measure(table, stationary=pi.stationary, name=pi.name + "-stripped")


# --------------------------------------------------------------------------- networks

class Network:
    """Undirected weighted graph stored as a symmetric sparse matrix without loops."""

    def __init__(self, vertices: Sequence, weights: sp.spmatrix):
        self.vertices = list(vertices)
        W = sp.csr_matrix(weights, dtype=float)
        W.setdiag(0.0)
        W.eliminate_zeros()
        if (abs(W - W.T) > 1e-12 * max(1.0, abs(W).max() if W.nnz else 1.0)).nnz:
            raise ChainError("network weights are not symmetric")
        if W.nnz and W.data.min() < 0:
            raise ChainError("negative edge weight")
        self.W = W
        self._index = {v: i for i, v in enumerate(self.vertices)}

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], vertices: Sequence | None = None) -> "Network":
        """Build from ``(u, v, weight)`` triples; parallel edges add up."""
        edges = list(edges)
        if vertices is None:
            seen = {}
            for u, v, _ in edges:
                seen.setdefault(u, None)
                seen.setdefault(v, None)
            vertices = list(seen)
        index = {v: i for i, v in enumerate(vertices)}
        n = len(vertices)
        ri, ci, vals = [], [], []
        for u, v, w in edges:
            if u == v:
                continue
            i, j = index[u], index[v]
            ri += [i, j]
            ci += [j, i]
            vals += [w, w]
        W = sp.csr_matrix((vals, (ri, ci)), shape=(n, n))
        W.sum_duplicates()
        return cls(vertices, W)

    def index(self, v) -> int:
        return self._index[v]

    def __contains__(self, v) -> bool:
        return v in self._index

    def weight(self, u, v) -> float:
        if u not in self._index or v not in self._index:
            return 0.0
        return float(self.W[self._index[u], self._index[v]])

    def conductance(self, v) -> float:
        """c_v, the total weight at ``v``."""
        i = self._index[v]
        return float(self.W[i].sum())

    def edges(self):
        """Yield ``(u, v, weight)`` once per undirected edge."""
        U = sp.triu(self.W, k=1).tocoo()
        for i, j, w in zip(U.row, U.col, U.data):
            yield self.vertices[i], self.vertices[j], float(w)

    def restrict(self, keep: Callable) -> "Network":
        idx = [i for i, v in enumerate(self.vertices) if keep(v)]
        return Network([self.vertices[i] for i in idx], self.W[idx][:, idx])

    def scaled(self, factor: float) -> "Network":
        return Network(self.vertices, self.W * factor)

    def unit(self) -> "Network":
        W = self.W.copy()
        W.data[:] = 1.0
        return Network(self.vertices, W)

    def walk_matrix(self) -> sp.csr_matrix:
        deg = np.asarray(self.W.sum(axis=1)).ravel()
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
        return (sp.diags(inv) @ self.W).tocsr()

    @property
    def n_edges(self) -> int:
        return sp.triu(self.W, k=1).nnz

    def __repr__(self):
        return f"Network({len(self.vertices)} vertices, {self.n_edges} edges)"


def additive_symmetrization(chain: FiniteChain, pi: Measure) -> Network:
    """Network with c_s(x,y) = (pi(x)P(x,y) + pi(y)P(y,x)) / 2.

    On a killed truncation the edge to the outside gets
    pi(x)(P(x,OUT) + P*(x,OUT)) / 2, i.e. the same formula written through the
    reversal, since pi(OUT) is not defined there.
    """
    n = chain.n
    piv = pi.vector(chain)
    R = reversal_matrix(chain, pi)
    S = 0.5 * (chain.matrix + R)
    if chain.has_outside and chain.matrix[n, n] != 1.0:
        raise ChainError("close_chain output: symmetrize the killed chain instead")
    rows = S[:n].tocoo()
    c = piv[rows.row] * rows.data
    mask = rows.row != rows.col
    size = chain.size
    C = sp.coo_matrix((c[mask], (rows.row[mask], rows.col[mask])), shape=(size, size)).tocsr()
    if chain.has_outside:
        # the outside row of S is absorbing; mirror the interior column instead
        col = C[:n, n].toarray().ravel()
        C = C.tolil()
        C[n, :n] = col.reshape(1, -1)
        C = C.tocsr()
    return Network(chain.labels, C)


# --------------------------------------------------------------------------- validation

@dataclass
class ValidationReport:
    max_row_residual: float
    negative_entries: int
    row_violations: list
    unreachable: list
    cannot_reach_origin: list

    @property
    def issues(self) -> list:
        out = []
        if self.row_violations:
            out.append(f"row sums off at {self.row_violations}")
        if self.negative_entries:
            out.append(f"{self.negative_entries} negative entries")
        if self.unreachable:
            out.append(f"unreachable from origin: {self.unreachable}")
        if self.cannot_reach_origin:
            out.append(f"cannot reach origin class: {self.cannot_reach_origin}")
        return out

    @property
    def ok(self) -> bool:
        return not self.issues


def validate(chain: FiniteChain, tol: float = ROW_TOL) -> ValidationReport:
    """Report row-sum residuals, negative entries and reachability problems."""
    P = chain.matrix
    sums = np.asarray(P.sum(axis=1)).ravel()
    resid = np.abs(sums - 1.0)
    labels = chain.labels
    bad_rows = [labels[i] for i in np.flatnonzero(resid > tol)]
    negative = int((P.data < 0).sum())
    G = (abs(P) > 0).astype(float)
    o = chain.index(chain.origin)
    reach = sp.csgraph.breadth_first_order(G, o, directed=True, return_predecessors=False)
    reach_set = set(reach.tolist())
    unreachable = [labels[i] for i in range(chain.size) if i not in reach_set]
    back = sp.csgraph.breadth_first_order(G.T.tocsr(), o, directed=True, return_predecessors=False)
    back_set = set(back.tolist())
    stuck = [x for i, x in enumerate(chain.states) if i not in back_set]
    return ValidationReport(float(resid.max()) if resid.size else 0.0, negative, bad_rows,
                            unreachable, stuck)


# --------------------------------------------------------------------------- file formats

def format_state(x) -> str:
    if x is OUTSIDE:
        return "OUT"
    if isinstance(x, tuple):
        return ",".join(format_state(v) for v in x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def parse_state(token: str):
    if token == "OUT":
        return OUTSIDE
    if "," in token:
        return tuple(parse_state(t) for t in token.split(","))
    try:
        return int(token)
    except ValueError:
        return token


def write_edge_list(network: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in network.edges():
            fh.write(f"{format_state(u)} {format_state(v)} {float(w)!r}\n")


def read_edge_list(path) -> Network:
    edges = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            u, v, w = parts
            edges.append((parse_state(u), parse_state(v), float(w)))
    return Network.from_edges(edges)


def write_kernel(chain: FiniteChain, path) -> None:
    labels = chain.labels
    M = chain.matrix.tocoo()
    order = np.lexsort((M.col, M.row))
    with open(path, "w", encoding="utf-8") as fh:
        for k in order:
            fh.write(f"{format_state(labels[M.row[k]])} {format_state(labels[M.col[k]])} "
                     f"{float(M.data[k])!r}\n")


def read_kernel(path, origin=None) -> FiniteChain:
    """Read ``x y prob`` triples.  A state named ``OUT`` becomes the outside."""
    triples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            x, y, p = parts
            triples.append((parse_state(x), parse_state(y), float(p)))
    seen = {}
    for x, y, _ in triples:
        for s in (x, y):
            if s is not OUTSIDE:
                seen.setdefault(s, None)
    states = tuple(_sorted_states(seen))
    has_out = any(x is OUTSIDE or y is OUTSIDE for x, y, _ in triples)
    index = {x: i for i, x in enumerate(states)}
    if has_out:
        index[OUTSIDE] = len(states)
    size = len(index)
    ri = [index[x] for x, _, _ in triples]
    ci = [index[y] for _, y, _ in triples]
    vals = [p for _, _, p in triples]
    M = sp.lil_matrix(sp.csr_matrix((vals, (ri, ci)), shape=(size, size)))
    if has_out and M[size - 1].nnz == 0:
        M[size - 1, size - 1] = 1.0
    return FiniteChain(states, M.tocsr(), states[0] if origin is None else origin,
                       KILLED if has_out else None)


def write_measure(pi: Measure, states: Iterable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x in states:
            fh.write(f"{format_state(x)} {float(pi(x))!r}\n")


def read_measure(path) -> Measure:
    table = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            table[parse_state(parts[0])] = float(parts[1])
    return Measure(table, name=str(path))
