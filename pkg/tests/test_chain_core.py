from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from tracelab.bd_chain import geometric_weights
from tracelab.chain_core import (IDENTIFIED, KILLED, OUTSIDE, ChainError, FiniteChain, Measure, Network,
                                 additive_symmetrization, bd_measure, birth_death_kernel, close_chain, counting_measure,
                                 format_state, line_walk_kernel, parse_state, read_edge_list, read_kernel,
                                 read_measure, reversal_matrix, stationary_measure, strip_holding,
                                 symmetrized_chain, time_reversal, truncate, validate, write_edge_list,
                                 write_kernel, write_measure)
from tracelab.instances import random_chain, random_killed_chain


def row_sums(chain):
    return np.asarray(chain.matrix.sum(axis=1)).ravel()


class TestTruncate:
    def test_biased_line_killed(self):
        ch = truncate(line_walk_kernel(2 / 3), lambda x: 0 <= x <= 8, KILLED)
        assert ch.n == 9 and ch.size == 10
        assert np.allclose(row_sums(ch), 1, atol=1e-12)
        assert ch.prob(8, OUTSIDE) == pytest.approx(2 / 3)
        assert ch.prob(0, OUTSIDE) == pytest.approx(1 / 3)

    def test_origin_excluded(self):
        with pytest.raises(ChainError):
            truncate(line_walk_kernel(0.5), lambda x: x > 0, KILLED)

    def test_srw_identified_boundary(self):
        ch = truncate(line_walk_kernel(0.5), 3, IDENTIFIED)
        assert ch.n == 7
        assert ch.prob(3, OUTSIDE) == pytest.approx(0.5)
        assert ch.prob(-3, OUTSIDE) == pytest.approx(0.5)
        assert np.allclose(row_sums(ch), 1, atol=1e-12)

    def test_interior_rows_unchanged(self):
        k = geometric_weights(2).kernel()
        ch = truncate(k, 5, KILLED)
        for x in range(5):
            for y, p in k.row(x):
                assert ch.prob(y if y <= 5 else OUTSIDE, x) >= 0
                assert ch.prob(x, y) == pytest.approx(p)


class TestStationary:
    def test_bd_closed_form(self):
        pi = bd_measure(lambda i: 2.0 ** i)
        assert pi(0) == 1.0
        for i in range(1, 8):
            assert pi(i) == 3 * 2 ** (i - 1)

    def test_bd_detailed_balance_exact(self):
        omega = lambda i: Fraction(2) ** i  # noqa: E731
        kernel = birth_death_kernel(omega)
        pi = bd_measure(omega)
        for i in range(9):
            up = dict(kernel.row(i))[i + 1]
            down = dict(kernel.row(i + 1))[i]
            assert Fraction(pi(i)) * Fraction(up) == Fraction(pi(i + 1)) * Fraction(down)

    def test_cycle_uniform(self, cycle3):
        ch, _ = cycle3
        pi = stationary_measure(ch)
        vals = [pi(x) for x in range(3)]
        assert np.allclose(vals, vals[0])

    def test_path_degrees(self):
        net = Network.from_edges([(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
        ch = FiniteChain((0, 1, 2, 3), net.walk_matrix(), 0, None)
        pi = stationary_measure(ch)
        ratio = np.array([pi(x) for x in range(4)]) / pi(0)
        assert np.allclose(ratio, [1, 2, 2, 1])

    def test_reducible_rejected(self):
        P = sp.csr_matrix(np.array([[1.0, 0.0], [0.5, 0.5]]))
        with pytest.raises(ChainError):
            stationary_measure(FiniteChain((0, 1), P, 0, None))

    def test_random_residual(self, rng):
        ch, _ = random_chain(15, rng)
        pi = stationary_measure(ch)
        assert pi.residual < 1e-10


class TestReversal:
    def test_reversible_bd(self):
        w = geometric_weights(2)
        ch = truncate(w.kernel(), 10, IDENTIFIED)
        closed, piv = close_chain(ch, w.measure)
        R = reversal_matrix(closed, piv)
        assert abs(R[:10, :10] - closed.matrix[:10, :10]).max() < 1e-12

    def test_cycle_reverses(self, cycle3):
        ch, pi = cycle3
        rev = time_reversal(ch, pi)
        assert np.allclose(rev.dense(), np.roll(np.eye(3), -1, axis=1))

    def test_involution(self, rng):
        for _ in range(10):
            ch, pi = random_chain(12, rng)
            twice = time_reversal(time_reversal(ch, pi), pi)
            assert abs(twice.matrix - ch.matrix).max() < 1e-12
            assert np.allclose(row_sums(time_reversal(ch, pi)), 1, atol=1e-12)

    def test_killed_reversal_stochastic(self, rng):
        ch, pi = random_killed_chain(10, rng)
        assert np.allclose(row_sums(time_reversal(ch, pi)), 1, atol=1e-12)

    def test_zero_mass_rejected(self, cycle3):
        ch, _ = cycle3
        with pytest.raises(ChainError):
            time_reversal(ch, Measure({0: 1.0, 1: 0.0, 2: 1.0}))


class TestSymmetrization:
    def test_reversible(self):
        w = geometric_weights(2)
        ch = truncate(w.kernel(), 6, KILLED)
        net = additive_symmetrization(ch, w.measure)
        for i in range(5):
            assert net.weight(i, i + 1) == pytest.approx(w.measure(i) * ch.prob(i, i + 1))

    def test_cycle_sixth(self, cycle3):
        ch, pi = cycle3
        net = additive_symmetrization(ch, pi)
        assert [w for *_, w in net.edges()] == pytest.approx([1 / 6] * 3)

    def test_biased_walk_is_srw(self):
        ch = truncate(line_walk_kernel(2 / 3), 20, KILLED)
        net = additive_symmetrization(ch, counting_measure())
        interior = [w for u, v, w in net.edges() if OUTSIDE not in (u, v)]
        assert np.allclose(interior, 0.5)

    def test_walk_is_half_sum(self, rng):
        ch, pi = random_chain(10, rng)
        S = symmetrized_chain(ch, pi).matrix
        R = time_reversal(ch, pi).matrix
        assert abs(S - 0.5 * (ch.matrix + R)).max() < 1e-12
        net = additive_symmetrization(ch, pi)
        assert abs(net.W - net.W.T).max() < 1e-15


class TestClosureAndHolding:
    def test_close_restores_stationarity(self, rng):
        ch, pi = random_killed_chain(12, rng)
        closed, piv = close_chain(ch, pi)
        assert np.abs(piv @ closed.matrix - piv).max() < 1e-12
        assert np.allclose(row_sums(closed), 1, atol=1e-12)

    def test_strip_holding(self, rng):
        ch, pi = random_killed_chain(10, rng, holding=0.6)
        st, pis = strip_holding(ch, pi)
        assert np.all(st.matrix.diagonal()[:10] == 0)
        assert np.allclose(row_sums(st), 1, atol=1e-12)
        closed, piv = close_chain(st, pis)
        assert np.abs(piv @ closed.matrix - piv).max() < 1e-12


class TestValidate:
    def test_clean(self, cycle3):
        assert validate(cycle3[0]).ok

    def test_row_sum_flag(self):
        P = sp.csr_matrix(np.array([[0.0, 0.99], [1.0, 0.0]]))
        rep = validate(FiniteChain((0, 1), P, 0, None))
        assert rep.row_violations == [0]

    def test_isolated_state(self):
        P = sp.csr_matrix(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
        rep = validate(FiniteChain((0, 1, 2), P, 0, None))
        assert rep.unreachable == [2] and not rep.ok


class TestFiles:
    def test_state_tokens(self):
        for x in (0, -3, (2, -1), OUTSIDE):
            assert parse_state(format_state(x)) == x

    def test_kernel_roundtrip(self, tmp_path, rng):
        ch, pi = random_killed_chain(8, rng)
        write_kernel(ch, tmp_path / "k.txt")
        back = read_kernel(tmp_path / "k.txt")
        assert back.states == ch.states
        assert abs(back.matrix - ch.matrix).max() == 0
        write_measure(pi, ch.states, tmp_path / "m.txt")
        assert read_measure(tmp_path / "m.txt")(3) == pi(3)

    def test_edge_list_roundtrip(self, tmp_path):
        net = Network.from_edges([((0, 0), (0, 1), 2.5), ((0, 1), (1, 1), 1.0)])
        write_edge_list(net, tmp_path / "e.txt")
        back = read_edge_list(tmp_path / "e.txt")
        assert back.weight((0, 0), (0, 1)) == 2.5
        assert back.n_edges == 2
