import json

import numpy as np
import pytest
import scipy.sparse as sp

from tracelab.bd_chain import geometric_weights, jlp_weights, kozma_weights, simulate
from tracelab.chain_core import KILLED, ChainError, FiniteChain, counting_measure, line_walk_kernel
from tracelab.instances import biased_walk, standard_instances
from tracelab.planar_spiral import SpiralConfig
from tracelab.planar_spiral import simulate as simulate_spiral
from tracelab.potential import NonTransient
from tracelab.traces import (RecurrenceProfile, concavity_check, expected_network_profile, harmonic_crossing_sum,
                             load_trace, path_network, record_trace, sample_path, sup_radius,
                             trace_resistance_profile)

TWO = geometric_weights(2)


class TestRecordTrace:
    def test_single_step(self):
        tr = record_trace(["o", "x"])
        assert tr.vertices == {"o", "x"} and tr.crossings("o", "x") == 1 and tr.check() == []

    def test_empty(self):
        with pytest.raises(ChainError):
            record_trace([])

    def test_bd_ledger(self):
        led = simulate(jlp_weights(), 50, seed=3)
        tr = record_trace(led)
        assert tr.check() == [] and tr.origin == 0
        assert tr.crossings(4, 5) == led.crossings[4] and tr.meta["seed"] == 3

    def test_spiral_ledger(self):
        cov = simulate_spiral(SpiralConfig(horizon=8, seed=2))
        tr = record_trace(cov)
        assert tr.origin == (0, 0) and tr.check() == []
        assert tr.crossings((0, 0), (1, 0)) == cov.count((0, 0), (1, 0))

    def test_path_with_repeats(self):
        tr = record_trace([0, 1, 0, 1, 2])
        assert tr.crossings(0, 1) == 3 and tr.crossings(1, 2) == 1

    def test_load_roundtrip(self, tmp_path):
        led = simulate(jlp_weights(), 40, seed=1)
        led.save(tmp_path / "bd")
        assert load_trace(tmp_path / "bd").crossings(3, 4) == led.crossings[3]
        cov = simulate_spiral(SpiralConfig(horizon=6, seed=1))
        cov.save(tmp_path / "z2")
        tr = load_trace(tmp_path / "z2")
        assert tr.origin == (0, 0) and tr.crossings((0, 0), (0, 1)) == cov.count((0, 0), (0, 1))


class TestHarmonicSums:
    def test_harmonic_numbers(self):
        s = harmonic_crossing_sum(np.arange(1, 11))
        assert s[-1] == pytest.approx(sum(1 / k for k in range(1, 11)))

    def test_unit(self):
        assert harmonic_crossing_sum(np.ones(7), 5)[-1] == 5

    def test_zero_count(self):
        with pytest.raises(ChainError):
            harmonic_crossing_sum(np.array([1, 0, 3]))

    def test_kozma_run_increases(self):
        led = simulate(kozma_weights(0), 4096, seed=0)
        s = harmonic_crossing_sum(led, 4096)[[2 ** m - 1 for m in range(1, 13)]]
        assert np.all(np.diff(s) > 0)


class TestProfiles:
    def test_line_identity(self):
        led = simulate(jlp_weights(), 300, seed=8)
        radii = [4, 16, 64, 256]
        prof = trace_resistance_profile(record_trace(led), radii)
        h = harmonic_crossing_sum(led)
        assert prof.resistance == pytest.approx([h[R - 1] for R in radii], rel=1e-12)
        assert prof.monotone

    def test_rayleigh_comparison(self):
        led = simulate(jlp_weights(), 300, seed=9)
        prof = trace_resistance_profile(record_trace(led), [8, 32, 128])
        assert np.all(prof.resistance_unit >= prof.resistance / led.crossings.max() - 1e-12)

    def test_spiral_profile(self):
        for seed in range(5):
            cov = simulate_spiral(SpiralConfig(horizon=40, seed=seed))
            prof = trace_resistance_profile(record_trace(cov), [4, 8, 16, 32])
            assert prof.monotone and prof.verdict == "diverging"

    def test_disconnected_is_infinite(self):
        tr = record_trace([0, 1, 2])
        prof = trace_resistance_profile(tr, [1, 5])
        assert np.isinf(prof.resistance[-1]) and prof.verdict == "diverging"

    def test_flat_is_inconclusive(self):
        prof = RecurrenceProfile(np.array([2, 4, 8, 16]), np.array([1.0, 1.0, 1.0, 1.0]))
        assert prof.verdict == "inconclusive"

    def test_csv(self, tmp_path):
        prof = RecurrenceProfile(np.array([2, 4]), np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        prof.save_csv(tmp_path / "p.csv")
        assert (tmp_path / "p.csv").read_text().splitlines() == ["R,resistance_N,resistance_unit",
                                                                "2,1.0,3.0", "4,2.0,4.0"]
        assert prof.ratio(4, 2) == 2.0

    def test_sup_radius(self):
        assert sup_radius(-3) == 3 and sup_radius((2, -5)) == 5


class TestExpectedProfiles:
    def test_two_pow_closed_form(self):
        radii = [2, 4, 8, 16]
        prof = expected_network_profile(TWO.kernel(), TWO.measure, 0, radii, horizon=128)
        # E_0 N(i, i+1) = 2^i (R(i) + R(i+1)) - 1 = 3 with R(k) = 2^(1-k); the ball boundary sits at R
        assert prof.resistance == pytest.approx([R / 3 for R in radii], rel=1e-10)
        assert np.all(np.diff(prof.resistance) > 0)

    def test_srw_abstains(self):
        with pytest.raises(NonTransient):
            expected_network_profile(line_walk_kernel(0.5), counting_measure(), 0, [4, 16, 64])

    def test_biased_walk_grows(self):
        inst = biased_walk()
        prof = expected_network_profile(inst.kernel, inst.measure, 0, [2 ** k for k in range(2, 13)])
        assert prof.monotone and prof.ratio(4096, 64) >= 4

    def test_standard_instances(self):
        for inst in standard_instances():
            prof = expected_network_profile(inst.kernel, inst.measure, None, [64, 4096])
            assert prof.ratio(4096, 64) >= 4, inst.name


class TestConcavity:
    def test_deterministic_chain(self):
        # 0 -> 1 -> 2 -> outside, no randomness
        P = sp.csr_matrix(np.array([[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 1.0]]))
        ch = FiniteChain((0, 1, 2), P, 0, KILLED)
        rec = concavity_check(ch, counting_measure(), 0, [1], runs=20)
        assert rec.se == 0 and rec.mean == pytest.approx(rec.expected_network_capacity, abs=1e-10)

    def test_empty_set(self):
        rec = concavity_check(TWO.trace_chain(10), TWO.measure, 0, [], runs=5)
        assert rec.mean == 0 and rec.expected_network_capacity == 0 and rec.holds

    def test_two_pow(self, tmp_path):
        rec = concavity_check(TWO.trace_chain(30), TWO.measure, 0, [0], runs=2000, seed=1)
        assert rec.holds and rec.se > 0
        rec.save_json(tmp_path / "c.json")
        assert json.loads((tmp_path / "c.json").read_text())["runs"] == 2000

    def test_sample_path_ends_outside(self, rng):
        ch = TWO.trace_chain(12)
        for _ in range(50):
            path = sample_path(ch, rng)
            assert path[0] == 0 and path[-1] == ch.n
            assert np.all(np.abs(np.diff(path[:-1])) <= 1)
        net = path_network(ch, sample_path(ch, rng))
        assert 0 in net

    def test_sample_path_needs_killed(self, cycle3, rng):
        with pytest.raises(ChainError):
            sample_path(cycle3[0], rng)
