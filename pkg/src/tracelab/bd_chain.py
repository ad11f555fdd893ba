"""Birth-and-death chains on the non-negative integers.

Weights are indexed by the lower end of an edge: ``omega[k]`` is the
conductance of the edge (k, k+1).  The walk moves up from ``i`` with
probability omega[i] / (omega[i-1] + omega[i]) and always moves up from 0.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numba
import numpy as np
import scipy.sparse as sp

from .chain_core import KILLED, FiniteChain, Measure, TransitionKernel, bd_measure, birth_death_kernel

E = math.e
EXACT_LEVELS = 1 << 20
DEFAULT_MAX_STEPS = 10**8
CHUNK = 1 << 16


# --------------------------------------------------------------------------- iterated logs

def iterated_log(j: int, i):
    """Guarded j-th iterated natural logarithm.

    log*^(0) i = i and log*^(j) i = log(log*^(j-1) i) when that value is at
    least e, otherwise 1.  Accepts scalars or arrays.
    """
    if j < 0:
        raise ValueError("j must be non-negative")
    x = np.asarray(i, dtype=float)
    if np.any(x < 1):
        raise ValueError("iterated_log needs i >= 1")
    for _ in range(j):
        x = np.where(x >= E, np.log(np.maximum(x, 1.0)), 1.0)
    return float(x) if x.ndim == 0 else x


def g(s: int, i):
    """g_s(i) = i * prod_{j=1..s} log*^(j)(i)."""
    x = np.asarray(i, dtype=float)
    out = x.copy()
    L = x
    for _ in range(s):
        L = np.where(L >= E, np.log(np.maximum(L, 1.0)), 1.0)
        out = out * L
    return float(out) if out.ndim == 0 else out


def _log_g_sq(s: int, m: np.ndarray) -> np.ndarray:
    """log of g_s(m) * (log*^(s+1) m)^2, computed without overflow."""
    m = np.asarray(m, dtype=float)
    out = np.log(m)
    L = m
    for j in range(1, s + 2):
        L = np.where(L >= E, np.log(np.maximum(L, 1.0)), 1.0)
        out = out + (2.0 if j == s + 1 else 1.0) * np.log(L)
    return out


def _log_sq_tail(s: int, M: float) -> float:
    """Integral of 1/(g_s(x) (log*^(s+1) x)^2) over [M, inf).

    Between thresholds the integrand is 1/(x L_1 ... L_J) with J active logs;
    each completed regime contributes exactly 1.
    """
    x, J = float(M), 0
    for j in range(1, s + 2):
        if x >= E:
            x = math.log(x)
            J = j
        else:
            break
    if J == s + 1:
        return 1.0 / x
    if J == 0:
        raise ValueError("tail integral implemented for M >= e only")
    return (1.0 - math.log(x)) + (s - J) + 1.0


# --------------------------------------------------------------------------- weights

@dataclass(eq=False)
class BDWeights:
    """Edge weights of a birth-and-death chain.

    Parameters
    ----------
    log_omega : callable
        Vectorised map k -> log omega[k] (weight of edge (k, k+1)).
    tag : str
        Family name used in output headers.
    s : int or None
        Family parameter, if any.
    tail_integral : callable, optional
        M -> integral of 1/omega(x) over [M, inf) for large M; needed for
        quantities at infinite horizon.
    """

    log_omega: Callable
    tag: str = "custom"
    s: int | None = None
    tail_integral: Callable | None = None
    _tables: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_function(cls, omega: Callable, tail_integral=None, tag="custom") -> "BDWeights":
        def log_omega(k):
            k = np.asarray(k)
            return np.log(np.vectorize(omega, otypes=[float])(k))
        return cls(log_omega, tag, None, tail_integral)

    @classmethod
    def from_array(cls, omega: Sequence[float], tag="custom") -> "BDWeights":
        """Weights on a finite segment; only levels below len(omega)+1 are meaningful."""
        arr = np.log(np.asarray(omega, dtype=float))

        def log_omega(k):
            k = np.asarray(k)
            if np.any(k >= arr.size):
                raise ValueError("level beyond the supplied weight array")
            return arr[k]
        w = cls(log_omega, tag, None, None)
        w._tables["finite"] = arr.size
        return w

    def omega(self, k: int) -> float:
        return float(np.exp(self.log_omega(np.asarray(k))))

    def omega_array(self, K: int) -> np.ndarray:
        return np.exp(self.log_omega(np.arange(K)))

    def p_up(self, K: int) -> np.ndarray:
        """P(i, i+1) for i = 0..K-1."""
        lw = self.log_omega(np.arange(K))
        p = np.ones(K)
        if K > 1:
            p[1:] = 1.0 / (1.0 + np.exp(lw[:-1] - lw[1:]))
        return p

    @property
    def measure(self) -> Measure:
        return bd_measure(self.omega)

    def kernel(self) -> TransitionKernel:
        return birth_death_kernel(self.log_weight, name=self.tag, log=True)

    def log_weight(self, k: int) -> float:
        return float(self.log_omega(np.asarray(k)))

    # resistances ------------------------------------------------------------
    def _prefix(self, K: int) -> np.ndarray:
        """C[k] = sum_{m<k} 1/omega[m] for k = 0..K."""
        have = self._tables.get("prefix")
        if have is None or have.size < K + 1:
            size = max(K + 1, 1024)
            if "finite" in self._tables:
                size = min(size, self._tables["finite"] + 1)
                if K + 1 > size:
                    raise ValueError("level beyond the supplied weight array")
            inv = np.exp(-self.log_omega(np.arange(size - 1)))
            have = np.concatenate([[0.0], np.cumsum(inv)])
            self._tables["prefix"] = have
        return have

    def resistance(self, i: int, j: int) -> float:
        """R(i <-> j) = sum_{m=i}^{j-1} 1/omega[m]."""
        if j < i:
            i, j = j, i
        if j <= EXACT_LEVELS:
            C = self._prefix(j)
            return float(C[j] - C[i])
        return self.tail(i) - self.tail(j)

    def resistance_array(self, lo: int, hi: int) -> np.ndarray:
        """R(m <-> hi) for m = lo..hi."""
        C = self._prefix(hi)
        return C[hi] - C[lo:hi + 1]

    def _suffix(self) -> np.ndarray:
        """T[k] = R(k <-> infinity) for k = 0..EXACT_LEVELS, summed from the top to keep small tails accurate."""
        have = self._tables.get("suffix")
        if have is None:
            if self.tail_integral is None:
                raise ValueError(f"weights {self.tag!r} have no tail; infinite-horizon quantities unavailable")
            inv = np.exp(-self.log_omega(np.arange(EXACT_LEVELS)))
            have = np.empty(EXACT_LEVELS + 1)
            have[-1] = self._far_tail(EXACT_LEVELS)
            have[:-1] = np.cumsum(inv[::-1])[::-1] + have[-1]
            self._tables["suffix"] = have
        return have

    def tail(self, k: int) -> float:
        """R(k <-> infinity)."""
        if k <= EXACT_LEVELS:
            return float(self._suffix()[k])
        if self.tail_integral is None:
            raise ValueError(f"weights {self.tag!r} have no tail; infinite-horizon quantities unavailable")
        return self._far_tail(k)

    def _far_tail(self, k: int) -> float:
        # sum_{m>=k} f(m) ~ int_k^inf f + f(k)/2 with f(m) = 1/omega[m]
        return self.tail_integral(k) + 0.5 * math.exp(-float(self.log_omega(np.asarray(k))))

    def tail_array(self, K: int) -> np.ndarray:
        """R(k <-> infinity) for k = 0..K."""
        return self._suffix()[:K + 1].copy()

    def escape(self, K: int) -> np.ndarray:
        """Pr_{i+1}[never hit i] = R(i<->i+1)/R(i<->inf) for i = 0..K-1."""
        R = self.tail_array(K)
        return np.exp(-self.log_omega(np.arange(K))) / R[:K]

    def trace_chain(self, L: int) -> FiniteChain:
        """Walk watched only on {0..L}, killed when it escapes to infinity.

        Excursions above L that return become a holding step at L, so voltages
        and hitting probabilities on {0..L} equal those of the infinite chain.
        """
        p = self.p_up(L + 1)
        esc = self.escape(L + 1)[L]
        rows, cols, vals = [], [], []
        for i in range(L + 1):
            if i > 0:
                rows.append(i); cols.append(i - 1); vals.append(1.0 - p[i])
            if i < L:
                rows.append(i); cols.append(i + 1); vals.append(p[i])
        rows += [L, L, L + 1]
        cols += [L, L + 1, L + 1]
        vals += [p[L] * (1.0 - esc), p[L] * esc, 1.0]
        M = sp.csr_matrix((vals, (rows, cols)), shape=(L + 2, L + 2))
        return FiniteChain(tuple(range(L + 1)), M, 0, KILLED)

    def is_transient(self) -> bool:
        return self.tail_integral is not None and math.isfinite(self.tail(0))

    def header(self) -> dict:
        return {"weights_tag": self.tag, "s": self.s}


def kozma_weights(s: int) -> BDWeights:
    """omega(k-1, k) = g_{s+2}(k) (log*^(s+3) k)^2, i.e. omega[k] at k+1."""
    if s < 0:
        raise ValueError("s must be non-negative")

    def log_omega(k):
        return _log_g_sq(s + 2, np.asarray(k, dtype=float) + 1.0)

    def tail_integral(M):
        return _log_sq_tail(s + 2, M + 1.0)

    return BDWeights(log_omega, f"kozma-{s}", s, tail_integral)


def jlp_weights() -> BDWeights:
    """omega(k-1, k) = max(k,3) ln^2 max(k,3)."""
    def log_omega(k):
        m = np.maximum(np.asarray(k, dtype=float) + 1.0, 3.0)
        return np.log(m) + 2.0 * np.log(np.log(m))

    def tail_integral(M):
        return 1.0 / math.log(M + 1.0)

    return BDWeights(log_omega, "jlp", None, tail_integral)


def log_squared_weights(s: int) -> BDWeights:
    """omega(k-1, k) = g_s(k) (log*^(s+1) k)^2; kozma_weights(s) is this family at s+2."""
    def log_omega(k):
        return _log_g_sq(s, np.asarray(k, dtype=float) + 1.0)

    def tail_integral(M):
        return _log_sq_tail(s, M + 1.0)

    return BDWeights(log_omega, f"logsq-{s}", s, tail_integral)


def geometric_weights(base: float = 2.0) -> BDWeights:
    """omega[k] = base**k (transient for base > 1)."""
    lb = math.log(base)

    def log_omega(k):
        return np.asarray(k, dtype=float) * lb

    def tail_integral(M):
        # exact: sum_{m>=M} base^-m minus the half-term the far-tail rule adds
        return base ** (-M) / (1.0 - 1.0 / base) - 0.5 * base ** (-M)

    return BDWeights(log_omega, "geometric" if base != 2 else "2pow", None, tail_integral if base > 1 else None)


def unit_weights(n_edges: int, last: float = 1.0) -> BDWeights:
    """Unit weights on a segment of ``n_edges`` edges, the last one weighted ``last``."""
    w = np.ones(n_edges)
    w[-1] = last
    return BDWeights.from_array(w, tag="unit")


FAMILIES = {
    "jlp": lambda s: jlp_weights(),
    "kozma": kozma_weights,
    "logsq": log_squared_weights,
    "2pow": lambda s: geometric_weights(2.0),
}


def weights_by_name(name: str, s: int = 0) -> BDWeights:
    try:
        return FAMILIES[name](s)
    except KeyError:
        raise ValueError(f"unknown weight family {name!r}; choose from {sorted(FAMILIES)}") from None


# --------------------------------------------------------------------------- path simulation

@numba.njit(cache=True)
def _run_chunk(p_up, u, pos, steps, max_steps, target, up, down, visits, path, record):
    """Advance the walk using uniforms ``u``.

    Status: 0 chunk used up, 1 target reached, 2 step budget hit, 3 level
    arrays too short.
    """
    n = u.shape[0]
    lim = p_up.shape[0] - 1
    used = 0
    while used < n:
        if pos >= target:
            return pos, steps, used, 1
        if steps >= max_steps:
            return pos, steps, used, 2
        if pos >= lim:
            return pos, steps, used, 3
        if u[used] < p_up[pos]:
            up[pos] += 1
            pos += 1
        else:
            pos -= 1
            down[pos] += 1
        visits[pos] += 1
        if record:
            path[used] = pos
        used += 1
        steps += 1
    if pos >= target:
        return pos, steps, used, 1
    if steps >= max_steps:
        return pos, steps, used, 2
    return pos, steps, used, 0


@dataclass
class CrossingLedger:
    """Per-edge crossing counts of one birth-and-death run.

    ``up[i]`` and ``down[i]`` count traversals of (i, i+1) in each direction,
    ``visits[i]`` counts times at level i (the start included).
    """

    weights_tag: str
    s: int | None
    seed: int
    up: np.ndarray
    down: np.ndarray
    visits: np.ndarray
    steps: int = 0
    position: int = 0
    target: int | None = None
    max_steps: int = DEFAULT_MAX_STEPS
    status: str = "running"
    rng_state: dict | None = None
    chunk_offset: int = 0
    path: np.ndarray | None = None

    @property
    def max_level(self) -> int:
        nz = np.flatnonzero(self.visits)
        return int(nz[-1]) if nz.size else 0

    @property
    def final_level(self) -> int:
        return self.position

    @property
    def complete(self) -> bool:
        return self.status == "complete"

    @property
    def crossings(self) -> np.ndarray:
        """N(i, i+1) for i below the highest level reached."""
        m = self.max_level
        return (self.up[:m] + self.down[:m]).astype(np.int64)

    def check(self) -> list[str]:
        """Consistency problems (empty when the ledger is sound)."""
        issues = []
        N = self.up + self.down
        if int(N.sum()) != self.steps:
            issues.append("total steps differ from total crossings")
        m = self.max_level
        if np.any(N[:m] < 1):
            issues.append("an edge below the maximum level was never crossed")
        parity = self.up - self.down
        want = np.zeros_like(parity)
        want[:self.position] = 1
        if np.any(parity != want):
            issues.append("up/down parity broken")
        arrivals = self.down.copy()
        arrivals[0] += 1
        arrivals[1:] += self.up[:-1]
        if np.any(arrivals != self.visits):
            issues.append("visit counts do not match arrivals")
        return issues

    # serialisation -----------------------------------------------------------
    def header(self) -> dict:
        return {
            "weights_tag": self.weights_tag, "s": self.s, "seed": self.seed,
            "steps": int(self.steps), "final_level": int(self.position),
            "max_level": self.max_level, "target": self.target, "max_steps": int(self.max_steps),
            "status": self.status, "rng_state": self.rng_state, "chunk_offset": int(self.chunk_offset),
        }

    def save(self, prefix) -> tuple[Path, Path]:
        """Write ``prefix.csv`` (i, N(i,i+1), visits(i)) and ``prefix.json``.

        The CSV also carries the up and down split so the run can be resumed.
        """
        prefix = Path(prefix)
        csv_path, json_path = prefix.with_suffix(".csv"), prefix.with_suffix(".json")
        m = max(self.max_level, self.position) + 1
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "N", "visits", "up", "down"])
            for i in range(m):
                w.writerow([i, int(self.up[i] + self.down[i]), int(self.visits[i]),
                            int(self.up[i]), int(self.down[i])])
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.header(), fh, indent=2)
        return csv_path, json_path

    @classmethod
    def load(cls, prefix) -> "CrossingLedger":
        prefix = Path(prefix)
        with open(prefix.with_suffix(".json"), encoding="utf-8") as fh:
            h = json.load(fh)
        rows = np.loadtxt(prefix.with_suffix(".csv"), delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        size = rows.shape[0] + 1
        up, down, visits = (np.zeros(size, dtype=np.int64) for _ in range(3))
        up[:rows.shape[0]] = rows[:, 3]
        down[:rows.shape[0]] = rows[:, 4]
        visits[:rows.shape[0]] = rows[:, 2]
        return cls(h["weights_tag"], h["s"], h["seed"], up, down, visits, h["steps"], h["final_level"],
                   h["target"], h["max_steps"], h["status"], h["rng_state"], h["chunk_offset"])


def simulate(weights: BDWeights, level: int | None = None, max_steps: int = DEFAULT_MAX_STEPS,
             seed: int = 0, record_path: bool = False, ledger: CrossingLedger | None = None) -> CrossingLedger:
    """Run the walk from 0 until it reaches ``level`` or spends ``max_steps``.

    Passing a saved ``ledger`` resumes it (with a possibly larger budget); the
    result is identical to an uninterrupted run with the same seed.
    """
    if level is None and max_steps is None:
        raise ValueError("need a level target or a step budget")
    target = np.iinfo(np.int64).max if level is None else int(level)
    if ledger is None:
        size = (target if level is not None else min(max_steps, 1 << 16)) + 2
        ledger = CrossingLedger(weights.tag, weights.s, seed, np.zeros(size, np.int64),
                                np.zeros(size, np.int64), np.zeros(size, np.int64),
                                target=level, max_steps=max_steps)
        ledger.visits[0] = 1
        rng = np.random.default_rng(seed)
    else:
        ledger.max_steps = max_steps
        ledger.target = level if level is not None else ledger.target
        rng = np.random.default_rng(ledger.seed)
        if ledger.rng_state is not None:
            rng.bit_generator.state = ledger.rng_state
    size = ledger.up.size
    p = weights.p_up(size)
    pieces = [] if record_path else None
    if record_path:
        pieces.append(np.array([ledger.position], dtype=np.int64))
    offset = ledger.chunk_offset
    buf = np.empty(CHUNK, dtype=np.int64)
    pos, steps = ledger.position, ledger.steps
    while True:
        state = rng.bit_generator.state
        u = rng.random(CHUNK)
        while True:
            pos, steps, used, status = _run_chunk(p, u[offset:], pos, steps, max_steps, target,
                                                  ledger.up, ledger.down, ledger.visits, buf, record_path)
            if record_path and used:
                pieces.append(buf[:used].copy())
            offset += used
            if status != 3:
                break
            ledger.up, ledger.down, ledger.visits = (np.concatenate([a, np.zeros(a.size, np.int64)])
                                                     for a in (ledger.up, ledger.down, ledger.visits))
            p = weights.p_up(ledger.up.size)
        if status == 0:
            offset = 0
            continue
        ledger.rng_state = state
        ledger.chunk_offset = offset
        break
    ledger.position, ledger.steps = int(pos), int(steps)
    ledger.status = "complete" if status == 1 else "budget"
    if record_path:
        ledger.path = np.concatenate(pieces)
    return ledger


# --------------------------------------------------------------------------- exact count samplers

@dataclass
class CountSample:
    """Down-crossing counts D[r, i] of edge (i, i+1) for a batch of runs.

    N(i, i+1) = 2 D_i + 1 and visits(i) = D_{i-1} + 1 + D_i.
    """

    down: np.ndarray
    horizon: str

    @property
    def crossings(self) -> np.ndarray:
        return 2 * self.down + 1

    @property
    def visits(self) -> np.ndarray:
        prev = np.zeros_like(self.down)
        prev[:, 1:] = self.down[:, :-1]
        return prev + 1 + self.down


def sample_counts_infinite(weights: BDWeights, K: int, runs: int, rng) -> CountSample:
    """Exact joint law of D_0..D_{K-1} over the whole (infinite) path.

    Departures from level i are down, up-and-return or up-for-good; given
    D_{i-1} down departures, D_i ~ NegBin(D_{i-1}+1, q_i + p_i esc_i).
    """
    rng = np.random.default_rng(rng)
    p = weights.p_up(K)
    succ = (1.0 - p) + p * weights.escape(K)
    D = np.empty((runs, K), dtype=np.int64)
    prev = np.zeros(runs, dtype=np.int64)
    for i in range(K):
        prev = rng.negative_binomial(prev + 1, succ[i])
        D[:, i] = prev
    return CountSample(D, "infinite")


def sample_counts_to_level(weights: BDWeights, L: int, runs: int, rng) -> CountSample:
    """Exact joint law of D_0..D_{L-1} for the path stopped at T_L.

    Top-down: D_{L-1} = 0 and D_i ~ NegBin(D_{i+1}+1, P(i+1, i+2)).
    """
    rng = np.random.default_rng(rng)
    p = weights.p_up(L + 1)
    D = np.zeros((runs, L), dtype=np.int64)
    cur = np.zeros(runs, dtype=np.int64)
    for i in range(L - 2, -1, -1):
        cur = rng.negative_binomial(cur + 1, p[i + 1])
        D[:, i] = cur
    return CountSample(D, f"level {L}")


def local_regeneration_sizes(weights: BDWeights, k: int, runs: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """|X(k)| and |X'(k)| per run, streaming the top-down sampler to level k^3.

    X(k) holds levels in [k, k^2+k] visited exactly once before T_{k^3};
    X'(k) is its part in [k, k^2].
    """
    rng = np.random.default_rng(rng)
    L = k ** 3
    if k ** 2 + k >= L:
        raise ValueError("k too small: need k^2 + k < k^3")
    p = weights.p_up(L + 1)
    above = np.zeros(runs, dtype=np.int64)  # D_{L-1}
    size_x = np.zeros(runs, dtype=np.int64)
    size_xp = np.zeros(runs, dtype=np.int64)
    hi = k * k + k
    for i in range(L - 2, k - 2, -1):
        below = rng.negative_binomial(above + 1, p[i + 1])  # D_i
        lvl = i + 1  # visits(lvl) = D_i + 1 + D_{i+1}
        if k <= lvl <= hi:
            once = (below == 0) & (above == 0)
            size_x += once
            if lvl <= k * k:
                size_xp += once
        above = below
    return size_x, size_xp


def expected_regeneration_size(weights: BDWeights, k: int, upper: int | None = None) -> float:
    """E|X(k)| = sum over levl in [k, upper] of P(l,l+1) (1/omega_l) / R(l <-> k^3)."""
    L = k ** 3
    hi = k * k + k if upper is None else upper
    p = weights.p_up(L)
    R = weights.resistance_array(0, L)
    lv = np.arange(k, hi + 1)
    inv = np.exp(-weights.log_omega(lv))
    return float(np.sum(p[lv] * inv / R[lv]))


def expected_crossings_bd(weights: BDWeights, K: int) -> np.ndarray:
    """E[N(i, i+1)] over the infinite path, i = 0..K-1.

    G(0, y) = pi(y) R(y<->inf), so E N(i,i+1) = omega_i (R(i<->inf) + R(i+1<->inf)).
    """
    R = weights.tail_array(K)
    return 2.0 * np.exp(weights.log_omega(np.arange(K))) * R[:K] - 1.0


# --------------------------------------------------------------------------- path statistics

def cut_times(path: Sequence) -> np.ndarray:
    """Times t < len-1 whose past range and strict future range are disjoint."""
    path = np.asarray(path)
    if path.size < 2:
        return np.zeros(0, dtype=np.int64)
    _, inv = np.unique(path, return_inverse=True)
    last = np.zeros(inv.max() + 1, dtype=np.int64)
    last[inv] = np.arange(path.size)  # later writes win: last occurrence
    reach = np.maximum.accumulate(last[inv])
    t = np.arange(path.size)
    return np.flatnonzero((reach == t) & (t < path.size - 1))


def local_regenerations(path: Sequence[int], k: int) -> tuple[set, set]:
    """X(k) and X'(k) from a recorded path that reaches k^3."""
    path = np.asarray(path, dtype=np.int64)
    L = k ** 3
    hit = np.flatnonzero(path >= L)
    if hit.size == 0:
        raise ValueError(f"path does not reach level {L}")
    seg = path[:hit[0]]
    counts = np.bincount(seg, minlength=L)
    hi = k * k + k
    X = {int(i) for i in range(k, hi + 1) if counts[i] == 1}
    return X, {i for i in X if i <= k * k}


def _dyadic_label(x: np.ndarray) -> np.ndarray:
    """0 -> 0, 2^(k-1) -> k, everything else -> -1."""
    x = np.asarray(x, dtype=np.int64)
    out = np.full(x.shape, -1, dtype=np.int64)
    out[x == 0] = 0
    pos = x > 0
    pow2 = pos & ((x & (x - 1)) == 0)
    out[pow2] = np.log2(x[pow2]).astype(np.int64) + 1
    return out


def induce_dyadic(path: Sequence[int]) -> np.ndarray:
    """Non-lazy chain induced on {0} u {2^k}, relabelled 2^(k-1) -> k.

    An empty array means the path never visited a dyadic level.
    """
    lab = _dyadic_label(np.asarray(path))
    lab = lab[lab >= 0]
    if lab.size == 0:
        return lab
    keep = np.ones(lab.size, dtype=bool)
    keep[1:] = lab[1:] != lab[:-1]
    return lab[keep]


def induced_weights(weights: BDWeights, K: int) -> np.ndarray:
    """Exact induced weights w^S(k-1, k) = 1 / R(d_{k-1} <-> d_k), k = 1..K.

    d_0 = 0 and d_k = 2^(k-1).
    """
    d = np.array([0] + [1 << (k - 1) for k in range(1, K + 1)], dtype=np.int64)
    C = weights._prefix(int(d[-1]))
    return 1.0 / (C[d[1:]] - C[d[:-1]])


def induced_weight_estimates(induced_paths: Sequence[np.ndarray], K: int, w01: float) -> np.ndarray:
    """Estimate w^S(k-1, k), k = 1..K, from induced paths.

    Uses w(k,k+1)/w(k-1,k) = P(k,k+1)/P(k,k-1) with transition counts, anchored at w(0,1) = ``w01``.
    NaN where a level was never left in both directions.
    """
    upc = np.zeros(K + 2)
    dnc = np.zeros(K + 2)
    for s in induced_paths:
        s = np.asarray(s)
        a, b = s[:-1], s[1:]
        m = (a <= K)
        np.add.at(upc, a[m & (b > a)], 1)
        np.add.at(dnc, a[m & (b < a)], 1)
    w = np.full(K, np.nan)
    w[0] = w01
    for k in range(1, K):
        if upc[k] > 0 and dnc[k] > 0:
            w[k] = w[k - 1] * upc[k] / dnc[k]
        else:
            break
    return w


# --------------------------------------------------------------------------- conditioning

@dataclass
class ConditionedWeights:
    """Doob transform of a chain on [ell, target] conditioned to hit target before ell.

    ``h[m - ell] = R(ell<->m)/R(ell<->target)``; ``omega[m - ell]`` is the weight of (m, m+1).
    """

    ell: int
    target: int
    h: np.ndarray
    omega: np.ndarray

    def p_up(self) -> np.ndarray:
        """P_hat(m, m+1) for m = ell+1..target-1."""
        w = self.omega
        return w[1:] / (w[:-1] + w[1:])


def doob_condition_weights(weights: BDWeights, ell: int, target: int) -> ConditionedWeights:
    if ell >= target:
        raise ValueError("ell must be below target")
    C = weights._prefix(target)
    R = C[ell:target + 1] - C[ell]
    h = R / R[-1]
    om = np.exp(weights.log_omega(np.arange(ell, target)))
    return ConditionedWeights(ell, target, h, om * h[:-1] * h[1:])


@numba.njit(cache=True)
def _segment_walk(p_up_from, lo, hi, start, u):
    """Walk on [lo, hi] from ``start`` until it hits lo or hi; p_up_from[m - lo]."""
    pos = start
    i = 0
    while lo < pos < hi and i < u.shape[0]:
        if u[i] < p_up_from[pos - lo]:
            pos += 1
        else:
            pos -= 1
        i += 1
    return pos, i


def run_conditioned(cw: ConditionedWeights, rng, start: int | None = None) -> int:
    """Exit level of one conditioned walk started at ``start`` (default ell+1)."""
    rng = np.random.default_rng(rng)
    p = np.zeros(cw.target - cw.ell + 1)
    p[1:-1] = cw.p_up()
    pos = cw.ell + 1 if start is None else start
    while cw.ell < pos < cw.target:
        pos, _ = _segment_walk(p, cw.ell, cw.target, pos, rng.random(CHUNK))
    return pos


# --------------------------------------------------------------------------- journeys

@numba.njit(cache=True)
def _journey(p_up, top, u, pos, down, upc, ev_level, ev_bucket, n_ev):
    n = u.shape[0]
    i = 0
    while pos < top and i < n:
        if u[i] < p_up[pos]:
            upc[pos] += 1
            pos += 1
        else:
            pos -= 1
            down[pos] += 1
            if pos >= 1:
                # transition pos+1 -> pos belongs to level pos's decomposition,
                # bucket = up-crossings of (pos-1, pos) so far
                ev_level[n_ev] = pos
                ev_bucket[n_ev] = upc[pos - 1]
                n_ev += 1
        i += 1
    return pos, n_ev


@dataclass
class JourneyStats:
    """One journey 0 -> 2n with its branching decomposition.

    ``K[i]`` counts transitions i+1 -> i before T_{2n}.  For level j+1,
    ``xi[j+1]`` holds the offspring counts of the K[j] excursions from j and
    ``J[j+1]`` the immigration count after the last visit to j.
    """

    n: int
    K: np.ndarray
    xi: list
    J: np.ndarray
    seed: int | None = None

    def identity_holds(self) -> bool:
        for j in range(2 * self.n - 1):
            x = self.xi[j + 1]
            if x.size != self.K[j] or self.K[j + 1] != self.J[j + 1] + x.sum():
                return False
        return True


def journey_crossing_process(n: int, weights: BDWeights | None = None, seed=None,
                             last_weight: float = 1.0) -> JourneyStats:
    """Record one journey from 0 to 2n on a segment (unit weights by default)."""
    if n < 1:
        raise ValueError("n must be positive")
    top = 2 * n
    if weights is None:
        weights = unit_weights(top, last_weight)
    rng = np.random.default_rng(seed)
    p = weights.p_up(top)
    p = np.append(p, 0.0)
    down = np.zeros(top + 1, np.int64)
    upc = np.zeros(top + 1, np.int64)
    cap = 1 << 20
    ev_level = np.empty(cap, np.int64)
    ev_bucket = np.empty(cap, np.int64)
    n_ev, pos = 0, 0
    while pos < top:
        if n_ev + CHUNK > ev_level.size:
            ev_level = np.concatenate([ev_level, np.empty_like(ev_level)])
            ev_bucket = np.concatenate([ev_bucket, np.empty_like(ev_bucket)])
        pos, n_ev = _journey(p, top, rng.random(CHUNK), pos, down, upc, ev_level, ev_bucket, n_ev)
    K = down[:top].copy()
    lv, bk = ev_level[:n_ev], ev_bucket[:n_ev]
    xi = [np.zeros(0, np.int64)]
    J = np.zeros(top, np.int64)
    order = np.argsort(lv, kind="stable")
    lv, bk = lv[order], bk[order]
    starts = np.searchsorted(lv, np.arange(top + 1))
    for j1 in range(1, top):
        b = bk[starts[j1]:starts[j1 + 1]]
        m = K[j1 - 1]
        counts = np.bincount(b, minlength=m + 2)[1:m + 2]
        xi.append(counts[:m].astype(np.int64))
        J[j1] = counts[m]
    return JourneyStats(n, K, xi, J, seed)


def journey_means(n: int, weights: BDWeights | None = None, last_weight: float = 1.0):
    """Exact alpha_{j+1} = E[xi+1] and beta_{j+1} = E[J+1] for j = 0..2n-2.

    Both come from Doob-transformed first-step analysis at j+1 with resistances
    to 2n.
    """
    top = 2 * n
    if weights is None:
        weights = unit_weights(top, last_weight)
    C = weights._prefix(top)
    p = weights.p_up(top)
    alpha = np.full(top, np.nan)
    beta = np.full(top, np.nan)
    for j in range(top - 1):
        R_to = lambda x: C[top] - C[x]  # noqa: E731
        R_from = lambda x: C[x] - C[j]  # noqa: E731
        q_hat = (1.0 - p[j + 1]) * R_to(j) / R_to(j + 1)
        alpha[j + 1] = 1.0 / q_hat
        r = (R_to(j + 2) / R_to(j + 1)) * (R_from(j + 1) / R_from(j + 2)) if j + 2 <= top else 0.0
        beta[j + 1] = 1.0 / (1.0 - r)
    return alpha, beta


__all__ = [
    "BDWeights", "ConditionedWeights", "CountSample", "CrossingLedger", "JourneyStats",
    "cut_times", "doob_condition_weights", "expected_crossings_bd", "expected_regeneration_size",
    "g", "geometric_weights", "induce_dyadic", "induced_weight_estimates", "induced_weights",
    "iterated_log", "jlp_weights", "journey_crossing_process", "journey_means", "kozma_weights",
    "local_regeneration_sizes", "local_regenerations", "log_squared_weights", "run_conditioned",
    "sample_counts_infinite", "sample_counts_to_level", "simulate", "unit_weights", "weights_by_name",
]
