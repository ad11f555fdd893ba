"""Test chains: random finite ones with known stationary measures and infinite reference chains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.linalg

from .bd_chain import geometric_weights
from .chain_core import (KILLED, FiniteChain, Measure, TransitionKernel, counting_measure, cycle_lift_kernel,
                         line_walk_kernel)


def _random_matrix(m: int, rng: np.random.Generator, density: float, reversible: bool,
                   holding: float) -> np.ndarray:
    """Irreducible stochastic matrix; a random Hamiltonian cycle guarantees connectivity."""
    mask = rng.random((m, m)) < density
    cycle = rng.permutation(m)
    mask[cycle, np.roll(cycle, -1)] = True
    np.fill_diagonal(mask, False)
    W = np.where(mask, rng.random((m, m)) + 0.05, 0.0)
    if reversible:
        W = W + W.T
    if holding > 0:
        W[np.diag_indices(m)] = np.where(rng.random(m) < holding, rng.random(m), 0.0)
    return W / W.sum(axis=1, keepdims=True)


def _left_null(P: np.ndarray) -> np.ndarray:
    v = scipy.linalg.null_space((np.eye(P.shape[0]) - P).T)[:, 0]
    v = np.abs(v)
    return v / v.sum()


def random_chain(n: int, rng: np.random.Generator, density: float = 0.3,
                 reversible: bool = False, holding: float = 0.0) -> tuple[FiniteChain, Measure]:
    """Irreducible chain on ``range(n)`` and its stationary measure."""
    P = _random_matrix(n, rng, density, reversible, holding)
    pi = _left_null(P)
    chain = FiniteChain(tuple(range(n)), sp.csr_matrix(P), 0, None)
    return chain, Measure(dict(enumerate(pi)), stationary=True, name="random")


def random_killed_chain(n: int, rng: np.random.Generator, density: float = 0.3,
                        reversible: bool = False, holding: float = 0.0) -> tuple[FiniteChain, Measure]:
    """Chain on ``range(n)`` killed at the outside, with an excessive measure.

    A closed irreducible chain on n + 1 states is drawn; its last state becomes
    the cemetery, and the measure is the closed chain's stationary law on the
    interior, so :func:`tracelab.chain_core.close_chain` recovers a stationary
    closure.
    """
    P = _random_matrix(n + 1, rng, density, reversible, holding)
    pi = _left_null(P)
    P[n, :] = 0.0
    P[n, n] = 1.0
    chain = FiniteChain(tuple(range(n)), sp.csr_matrix(P), 0, KILLED)
    return chain, Measure(dict(enumerate(pi[:n])), stationary=True, name="random-killed")


def generic_delta(values, rng: np.random.Generator, margin: float = 1e-6) -> float:
    """A level in (0, 1) at distance at least ``margin`` from every value."""
    vals = np.sort(np.unique(np.clip(np.asarray(values, dtype=float), 0.0, 1.0)))
    grid = np.concatenate([[0.0], vals, [1.0]])
    gaps = np.diff(grid)
    ok = np.flatnonzero(gaps > 2 * margin)
    k = ok[np.argmax(gaps[ok] * rng.random(ok.size))]
    return float(grid[k] + margin + (gaps[k] - 2 * margin) * rng.random())


@dataclass
class Instance:
    """Infinite transient chain with a stationary measure."""

    name: str
    kernel: TransitionKernel
    measure: Measure
    reversible: bool


def standard_instances() -> list[Instance]:
    """Geometric birth-death chains with ratios 2 and 3, and the ratio-2 chain lifted by a 3-cycle."""
    two, three = geometric_weights(2), geometric_weights(3)
    lift_pi = Measure(lambda x: two.measure(x[0]), stationary=True, name="lift")
    return [
        Instance("bd:2pow", two.kernel(), two.measure, True),
        Instance("bd:3pow", three.kernel(), three.measure, True),
        Instance("lift:2pow", cycle_lift_kernel(two.log_weight, log=True), lift_pi, False),
    ]


def biased_walk(p_up: float = 2 / 3) -> Instance:
    """Walk on Z with drift, paired with the counting measure (stationary, not reversible)."""
    return Instance(f"walk:{p_up:g}", line_walk_kernel(p_up), counting_measure(), False)


__all__ = ["Instance", "biased_walk", "generic_delta", "random_chain", "random_killed_chain",
           "standard_instances"]
