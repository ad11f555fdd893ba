import json
import math

import numpy as np
import pytest

from tracelab.bd_chain import g, iterated_log
from tracelab.planar_spiral import (BOUNDED, KOZMA, EdgeCoverage, SpiralConfig, box_covered, ccw_next, classify,
                                    coverage_report, cw_next, inward, outward, point_at, q_transition_table,
                                    simulate, sphere_position, spiral_weights, step_distribution)


def neighbours(p):
    x, y = p
    return {(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)}


class TestGeometry:
    def test_classify(self):
        assert classify((0, 0)).kind == "origin"
        assert classify((3, -3)) == ("corner", 3)
        assert classify((2, 1)) == ("side", 2)

    def test_moves(self):
        assert ccw_next((2, 0)) == (2, 1)
        assert outward((2, 0)) == (3, 0)
        assert inward((2, 0)) == (1, 0)
        assert ccw_next((2, 2)) == (1, 2)

    def test_orientation_per_side(self):
        assert ccw_next((3, 1)) == (3, 2)     # right side moves +y
        assert ccw_next((1, 3)) == (0, 3)     # top moves -x
        assert ccw_next((-3, 1)) == (-3, 0)   # left moves -y
        assert ccw_next((1, -3)) == (2, -3)   # bottom moves +x
        assert ccw_next((-2, -2)) == (-1, -2)
        assert ccw_next((2, -2)) == (2, -1)

    def test_corner_has_no_inward(self):
        with pytest.raises(ValueError):
            inward((2, 2))
        with pytest.raises(ValueError):
            ccw_next((0, 0))

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_positions_roundtrip_and_adjacency(self, k):
        pts = [point_at(k, pos) for pos in range(8 * k)]
        assert len(set(pts)) == 8 * k
        for pos, p in enumerate(pts):
            assert sphere_position(p) == (k, pos)
            assert ccw_next(p) in neighbours(p) and cw_next(ccw_next(p)) == p
            if classify(p).kind == "side":
                assert classify(inward(p)).k == k - 1 and inward(p) in neighbours(p)
                assert classify(outward(p)).k == k + 1 and inward(outward(p)) == p


class TestKernel:
    def test_weights_formula(self):
        w = spiral_weights()
        for k in (3, 50, 10**5):
            assert w.omega(k) == pytest.approx(g(4, k) * iterated_log(5, k) ** 2, rel=1e-12)
        assert w.omega(0) == w.omega(1) == 1.0
        assert w.is_transient()

    def test_origin(self):
        d = step_distribution((0, 0), SpiralConfig())
        assert sorted(q for q, _ in d) == [(-1, 0), (0, -1), (0, 1), (1, 0)]
        assert all(pr == 0.25 for _, pr in d)

    def test_side_point_k2(self):
        cfg = SpiralConfig()
        q = cfg.q_out()
        d = dict(step_distribution((2, 0), cfg))
        assert d[(2, 1)] == pytest.approx(0.75)
        assert d[(3, 0)] == pytest.approx(q[2] / 4)
        assert d[(1, 0)] == pytest.approx((1 - q[2]) / 4)

    def test_corner(self):
        assert step_distribution((2, 2), SpiralConfig()) == [((1, 2), 1.0)]
        d = dict(step_distribution((2, 2), SpiralConfig(BOUNDED)))
        assert d == {(1, 2): pytest.approx(2 / 3), (2, 1): pytest.approx(1 / 3)}

    def test_sphere_one_is_radial(self):
        d = dict(step_distribution((1, 0), SpiralConfig()))
        assert set(d) == {(2, 0), (0, 0)}

    @pytest.mark.parametrize("variant", [KOZMA, BOUNDED])
    def test_sums_to_one(self, variant):
        cfg = SpiralConfig(variant, horizon=12)
        for k in range(0, 12):
            for pos in range(max(8 * k, 1)):
                d = step_distribution(point_at(k, pos), cfg)
                assert math.fsum(pr for _, pr in d) == pytest.approx(1.0, abs=1e-12)
                assert all(pr >= 0 and q in neighbours(point_at(k, pos)) for q, pr in d)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            SpiralConfig("sideways")
        with pytest.raises(ValueError):
            SpiralConfig(horizon=0)


class TestSimulation:
    def test_deterministic(self):
        a, b = simulate(SpiralConfig(horizon=16, seed=4)), simulate(SpiralConfig(horizon=16, seed=4))
        assert a.steps == b.steps and np.array_equal(a.tang, b.tang) and np.array_equal(a.rad, b.rad)

    @pytest.mark.parametrize("variant", [KOZMA, BOUNDED])
    def test_ledger_consistent(self, variant):
        for seed in range(10):
            cov = simulate(SpiralConfig(variant, horizon=12, seed=seed))
            assert cov.reached and cov.check() == []
            # sphere index moves by one: net outward flow through each sphere is one
            assert np.all(cov.n_up[:12] - cov.n_down[1:13] == 1)

    def test_corners_never_move_radially(self):
        for seed in range(20):
            cov = simulate(SpiralConfig(horizon=10, seed=seed))
            for k in range(1, 11):
                seg = cov.rad[4 * k * (k - 1):4 * k * (k - 1) + 8 * k]
                assert np.all(seg[::2 * k] == 0)

    def test_budget(self):
        cov = simulate(SpiralConfig(horizon=64, max_steps=100, seed=1), engine="step")
        assert cov.status == "budget" and cov.steps == 100
        cov = simulate(SpiralConfig(horizon=64, max_steps=100, seed=1), engine="event")
        assert cov.status == "budget" and cov.steps >= 100

    def test_engines_agree(self):
        ev = [simulate(SpiralConfig(horizon=6, seed=s), engine="event") for s in range(400)]
        st = [simulate(SpiralConfig(horizon=6, seed=10**6 + s), engine="step") for s in range(400)]
        for k in (1, 3):
            a = np.array([c.n_down[k] for c in ev], float)
            b = np.array([c.n_down[k] for c in st], float)
            se = math.hypot(a.std(ddof=1), b.std(ddof=1)) / math.sqrt(400)
            assert abs(a.mean() - b.mean()) < 4 * se
        ta = np.mean([c.tangential(2).sum() for c in ev])
        tb = np.mean([c.tangential(2).sum() for c in st])
        assert abs(ta - tb) / tb < 0.15

    def test_event_engine_refuses_variant(self):
        with pytest.raises(ValueError):
            simulate(SpiralConfig(BOUNDED), engine="event")

    @pytest.mark.slow
    def test_down_transitions_against_g2(self):
        # threshold: 0.7-quantile of a pilot batch (demos/calibrate_ratio_threshold.py), frozen
        c, ks = 0.0186574, np.arange(1, 33)
        frac = {}
        for H in (128, 256):
            r = np.array([(simulate(SpiralConfig(horizon=H, seed=5000 + s)).down_transitions[:32] / g(2, ks)).min()
                          for s in range(300)])
            frac[H] = (r >= c).mean()
        se = math.sqrt(sum(f * (1 - f) / 300 for f in frac.values()))
        assert min(frac.values()) > 0 and abs(frac[128] - frac[256]) <= 2 * se

    def test_q_walk_at_change_times(self):
        cfg = SpiralConfig(horizon=32)
        covs = [simulate(SpiralConfig(horizon=32, seed=s)) for s in range(200)]
        for row in q_transition_table(covs, cfg, [(1, 4), (4, 12), (12, 32)]):
            assert row["n"] > 0 and abs(row["z"]) < 3


class TestCoverage:
    def test_empty_ledger(self):
        cov = EdgeCoverage.empty(KOZMA, 4)
        rep = coverage_report(cov, 3)
        n_edges = 2 * 7 * 6  # edges of the 7x7 box
        assert rep.n_uncovered == n_edges and not box_covered(cov, 3)

    def test_full_ledger(self):
        cov = EdgeCoverage.empty(KOZMA, 4)
        cov.tang[:] = 1
        cov.rad[:] = 1
        rep = coverage_report(cov, 3)
        assert rep.covered and box_covered(cov, 3)
        assert rep.annulus_min.tolist() == [1, 1, 1]

    def test_edge_lookup(self):
        cov = simulate(SpiralConfig(horizon=8, seed=3))
        assert cov.count((0, 0), (1, 0)) == cov.count((1, 0), (0, 0))
        total = sum(c for _, _, c in cov.edges(8))
        assert total == cov.tang[:4 * 8 * 9].sum() + cov.rad[:4 * 8 * 9].sum()
        with pytest.raises(ValueError):
            cov.count((0, 0), (1, 1))

    def test_report_beyond_horizon(self):
        with pytest.raises(ValueError):
            coverage_report(EdgeCoverage.empty(KOZMA, 4), 5)

    def test_save(self, tmp_path):
        cov = simulate(SpiralConfig(horizon=8, seed=3))
        csv_path, json_path = cov.save(tmp_path / "run", R=4)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "x1,y1,x2,y2,count" and len(lines) == 1 + 2 * 9 * 8
        meta = json.loads(json_path.read_text())
        assert meta["variant"] == KOZMA and meta["R"] == 4 and len(meta["down_transitions_per_k"]) == 8
