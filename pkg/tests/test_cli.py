import json
import os

import pytest

from uqlb.cli import SUITES, compare, main
from uqlb.errors import KeyMismatch


def run_cli(*argv):
    return main(list(argv))


class TestUsage:
    def test_unknown_suite_exits_2(self, tmp_path, capsys):
        assert run_cli("run", "no-such-suite", "--sim",
                       "--results", str(tmp_path)) == 2
        assert "unknown suite" in capsys.readouterr().err

    def test_missing_subcommand_exits_2(self):
        assert run_cli() == 2

    def test_bad_mode_exits_2(self, tmp_path):
        assert run_cli("run", "eigen-100", "--mode", "bogus",
                       "--results", str(tmp_path)) == 2

    def test_help_exits_0(self):
        assert run_cli("--help") == 0


class TestSuiteTable:
    def test_default_suites(self):
        defaults = {n for n, s in SUITES.items() if s.in_default_suite}
        assert defaults == {"eigen-100", "synthetic-gs2", "gp"}

    def test_lognormal_durations_clipped(self):
        suite = SUITES["synthetic-gs2"]
        durations = suite.durations(seed=0)
        scale = suite.sim_seconds_per_minute
        assert len(durations) == suite.n_evaluations
        assert min(durations) >= 1.0 * scale - 1e-12
        assert max(durations) <= 180.0 * scale + 1e-12

    def test_job_spec_command_has_reg_file_slot(self):
        spec = SUITES["eigen-100"].job_spec("bulk")
        assert "{reg_file}" in spec.command


class TestSimRun:
    def test_artifacts_written(self, tmp_path, capsys):
        code = run_cli("run", "eigen-100", "--sim", "--mode", "bulk",
                       "--depth", "2", "--results", str(tmp_path))
        assert code == 0
        outdir = tmp_path / "eigen-100" / "bulk" / "2"
        for name in ("records.csv", "summary.json", "box.csv"):
            assert (outdir / name).is_file()
        summary = json.loads((outdir / "summary.json").read_text())
        assert {"makespan", "overhead", "slr"} <= set(summary)
        assert "makespan=" in capsys.readouterr().out

    def test_both_modes_both_depths(self, tmp_path):
        code = run_cli("run", "eigen-100", "--sim", "--results", str(tmp_path))
        assert code == 0
        leaves = [os.path.join(m, str(d)) for m in ("perjob", "bulk") for d in (2, 10)]
        for leaf in leaves:
            assert (tmp_path / "eigen-100" / leaf / "summary.json").is_file()

    def test_byte_identical_reruns(self, tmp_path):
        for sub in ("a", "b"):
            assert run_cli("run", "synthetic-gs2", "--sim", "--seed", "3",
                           "--results", str(tmp_path / sub)) == 0
        for leaf in ("perjob/2", "perjob/10", "bulk/2", "bulk/10"):
            for name in ("records.csv", "summary.json", "box.csv"):
                pa = tmp_path / "a" / "synthetic-gs2" / leaf / name
                pb = tmp_path / "b" / "synthetic-gs2" / leaf / name
                assert pa.read_bytes() == pb.read_bytes()

    def test_sim_sweep_layout(self, tmp_path, capsys):
        code = run_cli("sim", "gp", "--mode", "bulk", "--depth", "2",
                       "--seeds", "3", "--results", str(tmp_path))
        assert code == 0
        for seed in range(3):
            assert (tmp_path / "gp" / "bulk" / "2" / f"seed-{seed}"
                    / "summary.json").is_file()
        assert "mean makespan" in capsys.readouterr().out


class TestCompare:
    def _populate(self, tmp_path):
        assert run_cli("run", "eigen-100", "--sim", "--results", str(tmp_path)) == 0
        return (str(tmp_path / "eigen-100" / "perjob"),
                str(tmp_path / "eigen-100" / "bulk"))

    def test_identity_ratios(self, tmp_path):
        perjob, _ = self._populate(tmp_path)
        rows = compare(perjob, perjob)
        assert [r["key"] for r in rows] == ["10", "2"]
        for r in rows:
            assert r["makespan_ratio"] == pytest.approx(1.0)
            assert r["overhead_ratio"] == pytest.approx(1.0)
            assert r["slr_a"] == r["slr_b"]

    def test_perjob_vs_bulk_flags(self, tmp_path):
        perjob, bulk = self._populate(tmp_path)
        rows = compare(perjob, bulk)
        for r in rows:
            assert r["overhead_ratio"] > 1.0
            assert r["makespan_ratio"] > 1.0

    def test_key_mismatch(self, tmp_path):
        perjob, bulk = self._populate(tmp_path)
        extra = os.path.join(bulk, "99")
        os.makedirs(extra)
        with open(os.path.join(extra, "summary.json"), "w") as f:
            json.dump({"makespan": 1.0, "overhead": 0.0, "slr": 1.0}, f)
        with pytest.raises(KeyMismatch):
            compare(perjob, bulk)

    def test_cli_compare_writes_report(self, tmp_path, capsys):
        perjob, bulk = self._populate(tmp_path)
        out = tmp_path / "report.json"
        assert run_cli("compare", perjob, bulk, "--out", str(out)) == 0
        rows = json.loads(out.read_text())
        assert {r["key"] for r in rows} == {"2", "10"}
        assert "overhead_ratio" in capsys.readouterr().out

    def test_cli_compare_empty_tree_fails(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run_cli("compare", str(empty), str(empty)) == 1
