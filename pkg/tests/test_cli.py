import json
import subprocess
import sys

import pytest

from tracelab.cli import main, parse_radii, parse_sweep


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def load(path):
    return json.loads(path.read_text())


class TestParsing:
    def test_radii(self):
        assert parse_radii("8..64") == [8, 16, 32, 64]
        assert parse_radii("3,5") == [3, 5]

    def test_sweep(self):
        assert parse_sweep("0.1:0.9:0.1") == pytest.approx([0.1 * k for k in range(1, 10)])
        assert parse_sweep("0.2,0.4") == [0.2, 0.4]


class TestSimulateBD:
    def test_ledgers_and_summary(self, tmp_path):
        assert run(tmp_path, "simulate-bd", "--s", "0", "--level", "256", "--runs", "3", "--seed", "7") == 0
        out = tmp_path / "simulate-bd"
        summary = load(out / "summary.json")
        assert summary["runs"] == 3 and summary["seeds"] == [7, 8, 9] and summary["harmonic_increasing"]
        for r in range(3):
            assert (out / f"run_{r:04d}.csv").exists() and (out / f"run_{r:04d}.json").exists()

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run(d, "simulate-bd", "--weights", "jlp", "--level", "128", "--runs", "2", "--seed", "3") == 0
        for name in ("run_0000.csv", "run_0001.csv", "summary.json"):
            assert (a / "simulate-bd" / name).read_bytes() == (b / "simulate-bd" / name).read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(a, "simulate-bd", "--weights", "jlp", "--level", "64", "--runs", "3") == 0
        assert run(b, "simulate-bd", "--weights", "jlp", "--level", "64", "--runs", "3", "--jobs", "2") == 0
        for r in range(3):
            name = f"run_{r:04d}.csv"
            assert (a / "simulate-bd" / name).read_bytes() == (b / "simulate-bd" / name).read_bytes()

    def test_cut_times(self, tmp_path):
        assert run(tmp_path, "simulate-bd", "--weights", "jlp", "--level", "512", "--runs", "4",
                   "--cut-times", "--k", "4", "8") == 0
        reg = load(tmp_path / "simulate-bd" / "summary.json")["regeneration"]
        assert set(reg) == {"4", "8"} and "mean_X" in reg["4"]

    def test_budget_exit(self, tmp_path):
        assert run(tmp_path, "simulate-bd", "--level", "1024", "--max-steps", "50") == 3
        assert (tmp_path / "simulate-bd" / "run_0000.csv").exists()

    def test_bad_weights(self, tmp_path):
        assert run(tmp_path, "simulate-bd", "--weights", "nope") == 2


class TestSimulateZ2:
    def test_coverage_summary(self, tmp_path):
        assert run(tmp_path, "simulate-z2", "--R", "16", "--runs", "4") == 0
        summary = load(tmp_path / "simulate-z2" / "summary.json")
        assert set(summary["coverage"]) == {"4", "8", "16"} and summary["q_table"]

    def test_variant(self, tmp_path):
        assert run(tmp_path, "simulate-z2", "--R", "8", "--variant", "bounded-below") == 0
        assert run(tmp_path, "simulate-z2", "--variant", "sideways") == 2


class TestPotential:
    def test_capacity_ladder(self, tmp_path):
        assert run(tmp_path, "potential", "--chain", "bd:2pow", "--cap", "0", "--radii", "8..4096") == 0
        rows = (tmp_path / "potential" / "capacity.csv").read_text().splitlines()
        assert len(rows) == 1 + 10
        assert float(rows[-1].split(",")[2]) == pytest.approx(0.5, abs=1e-12)

    def test_checks(self, tmp_path):
        assert run(tmp_path, "potential", "--radii", "8..256", "--delta-sweep", "0.1:0.9:0.1",
                   "--check", "capadel", "--check", "prop32", "--assert-invariants") == 0
        rep = load(tmp_path / "potential" / "report.json")
        assert len(rep["capadel"]) == 9 and all(r["holds"] for r in rep["prop32"])
        assert rep["failures"] == []

    def test_unknown_chain(self, tmp_path):
        assert run(tmp_path, "potential", "--chain", "tree:3") == 2


class TestSubdivide:
    def test_all_pass(self, tmp_path):
        assert run(tmp_path, "subdivide", "--delta", "0.3", "--export") == 0
        rep = load(tmp_path / "subdivide" / "report.json")
        assert rep["ok"] and rep["Z"] == ["z(1|2)"]
        assert (tmp_path / "subdivide" / "aux.P.txt").exists()

    def test_collision(self, tmp_path, capsys):
        assert run(tmp_path, "subdivide", "--delta", "0.5") == 4
        assert "perturb delta" in capsys.readouterr().err
        assert run(tmp_path, "subdivide", "--delta", "0.5", "--on-tie", "snap") == 0

    def test_tolerance_violation(self, tmp_path):
        assert run(tmp_path, "subdivide", "--delta", "0.3", "--tol", "-1") == 5


class TestTrace:
    def test_ledgers(self, tmp_path):
        assert run(tmp_path, "simulate-bd", "--weights", "jlp", "--level", "256", "--runs", "2") == 0
        assert run(tmp_path, "simulate-z2", "--R", "16", "--runs", "1") == 0
        ledgers = [str(tmp_path / "simulate-bd" / "run_0000"), str(tmp_path / "simulate-z2" / "run_0000")]
        assert run(tmp_path, "trace", "--ledger", *ledgers) == 0
        prof = load(tmp_path / "trace" / "profiles.json")
        assert set(prof) == {"simulate-bd_run_0000", "simulate-z2_run_0000"}
        assert all(p["monotone"] for p in prof.values())

    def test_expected(self, tmp_path):
        assert run(tmp_path, "trace", "--expected", "--chain", "walk:0.6667", "--radii", "8..512") == 0
        assert (tmp_path / "trace" / "expected_profile.csv").exists()
        assert run(tmp_path, "trace", "--expected", "--chain", "walk:0.5", "--radii", "8..64") == 0
        assert "abstained" in load(tmp_path / "trace" / "profiles.json")["expected"]

    def test_nothing_to_do(self, tmp_path):
        assert run(tmp_path, "trace") == 2


class TestConfig:
    def test_file_and_precedence(self, tmp_path, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 11, "out": str(tmp_path / "from_config"),
                                   "simulate-bd": {"weights": "jlp", "level": 64}}))
        assert main(["simulate-bd", "--config", str(cfg)]) == 0
        assert load(tmp_path / "from_config" / "simulate-bd" / "summary.json")["seeds"] == [11]
        monkeypatch.setenv("TRACE_LAB_OUT", str(tmp_path / "from_env"))
        assert main(["simulate-bd", "--config", str(cfg), "--seed", "12"]) == 0
        assert load(tmp_path / "from_env" / "simulate-bd" / "summary.json")["seeds"] == [12]
        assert main(["simulate-bd", "--config", str(cfg), "--out", str(tmp_path / "from_flag")]) == 0
        assert (tmp_path / "from_flag" / "simulate-bd" / "summary.json").exists()

    def test_bad_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"simulate-bd": {"colour": "red"}}))
        assert main(["simulate-bd", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["potential", "--config", str(tmp_path / "none.json")]) == 2

    def test_entry_point(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "tracelab.cli", "subdivide", "--delta", "0.5",
                              "--out", str(tmp_path)], capture_output=True, text=True)
        assert res.returncode == 4
