"""Command-line interface: episode output files, sweep resume, analysis."""

import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from viewpath.cli import CSV_FIELDS, analyze_logs, main


@pytest.fixture(scope="module")
def episode_dir(tmp_path_factory):
    """One tiny episode per strategy, shared across tests."""
    out = tmp_path_factory.mktemp("episodes")
    runner = CliRunner()
    scenario = out / "scenario.yaml"
    scenario.write_text("n_nbv: 1\nobstacle_count: 3\n")
    for strategy in ("focus", "no_path"):
        res = runner.invoke(main, ["run", "--scenario", str(scenario),
                                   "--seed", "0", "--strategy", strategy,
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
    return out


class TestRun:
    def test_writes_csv_and_json(self, episode_dir):
        csv_path = episode_dir / "episode_s0_focus.csv"
        json_path = episode_dir / "episode_s0_focus.json"
        assert csv_path.exists() and json_path.exists()
        header = csv_path.read_text().splitlines()[0]
        assert header == ",".join(CSV_FIELDS)
        summary = json.loads(json_path.read_text())
        assert summary["strategy"] == "focus"
        assert 0.0 <= summary["coverage"] <= 1.0
        assert summary["total_time"] == pytest.approx(
            summary["sim_time_s"] + summary["plan_time_s"])

    def test_csv_deterministic_on_rerun(self, episode_dir, tmp_path):
        runner = CliRunner()
        scenario = episode_dir / "scenario.yaml"
        res = runner.invoke(main, ["run", "--scenario", str(scenario),
                                   "--seed", "0", "--strategy", "focus",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 0
        assert (tmp_path / "episode_s0_focus.csv").read_bytes() == \
            (episode_dir / "episode_s0_focus.csv").read_bytes()

    def test_bad_scenario_exits_2(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("strategy: teleport\n")
        res = CliRunner().invoke(main, ["run", "--scenario", str(bad),
                                        "--seed", "0", "--strategy",
                                        "focus", "--out", str(tmp_path)])
        assert res.exit_code == 2

    def test_unknown_strategy_rejected_by_parser(self, tmp_path):
        res = CliRunner().invoke(main, ["run", "--seed", "0", "--strategy",
                                        "teleport", "--out", str(tmp_path)])
        assert res.exit_code != 0


class TestSweep:
    def test_resume_skips_existing(self, episode_dir, tmp_path):
        manifest = tmp_path / "manifest.yaml"
        manifest.write_text(yaml.safe_dump({
            "scenario": str(episode_dir / "scenario.yaml"),
            "seeds": [0],
            "strategies": ["focus", "no_path"],
            "out_dir": str(episode_dir),
        }))
        before = (episode_dir / "episode_s0_focus.json").stat().st_mtime_ns
        res = CliRunner().invoke(main, ["sweep", "--manifest", str(manifest)])
        assert res.exit_code == 0, res.output
        # both episodes already existed: nothing rewritten
        after = (episode_dir / "episode_s0_focus.json").stat().st_mtime_ns
        assert after == before
        summary = (episode_dir / "sweep_summary.csv").read_text()
        assert "focus" in summary and "no_path" in summary

    def test_summary_matches_raw_logs(self, episode_dir, tmp_path):
        import csv
        manifest = tmp_path / "manifest.yaml"
        manifest.write_text(yaml.safe_dump({
            "scenario": str(episode_dir / "scenario.yaml"),
            "seeds": [0],
            "strategies": ["focus", "no_path"],
            "out_dir": str(episode_dir),
        }))
        res = CliRunner().invoke(main, ["sweep", "--manifest", str(manifest)])
        assert res.exit_code == 0
        with open(episode_dir / "sweep_summary.csv") as f:
            rows = {r["strategy"]: r for r in csv.DictReader(f)}
        for strat, row in rows.items():
            with open(episode_dir / f"episode_s0_{strat}.csv") as f:
                final = list(csv.DictReader(f))[-1]
            # single episode per strategy: mean equals the final-step value
            assert float(row["coverage_mean"]) == pytest.approx(
                float(final["coverage"]), abs=1e-6)
            assert float(row["entropy_mean"]) == pytest.approx(
                float(final["entropy"]), abs=1e-4)

    def test_missing_keys_exit_2(self, tmp_path):
        manifest = tmp_path / "manifest.yaml"
        manifest.write_text("seeds: [0]\n")
        res = CliRunner().invoke(main, ["sweep", "--manifest", str(manifest)])
        assert res.exit_code == 2


class TestAnalyze:
    def _fake_logs(self, tmp_path, shift):
        rng = np.random.default_rng(0)
        for strat, mean in (("focus", 0.5 + shift), ("no_path", 0.5)):
            for seed in range(20):
                summary = {
                    "seed": seed, "strategy": strat, "steps": 1,
                    "aborted": False,
                    "coverage": float(rng.normal(mean, 0.004)),
                    "entropy": float(rng.normal(2e6, 1e4)),
                    "sim_time_s": 100.0, "plan_time_s": 1.0,
                    "total_time": float(rng.normal(101.0, 1.0)),
                    "plan_rays": 100, "min_d_tilde": 0.01,
                    "visibility_checked": 10, "visibility_ok": 10,
                    "infeasible_steps": 0,
                    "max_box_entropy": 2.8e6,
                }
                with open(tmp_path / f"episode_s{seed}_{strat}.json",
                          "w") as f:
                    json.dump(summary, f)
        return tmp_path

    def test_detects_clear_difference(self, tmp_path):
        logs = self._fake_logs(tmp_path, shift=0.2)
        report = analyze_logs(logs, rope_file=None, seed=0, draws=4000)
        comp = report["comparisons"]["focus_vs_no_path.coverage"]
        assert comp["verdict"] == "distinct"
        assert comp["median"] == pytest.approx(0.2, abs=0.02)
        assert (logs / "analysis.json").exists()
        assert (logs / "diff_focus_vs_no_path.coverage.csv").exists()

    def test_equivalent_within_rope(self, tmp_path):
        logs = self._fake_logs(tmp_path, shift=0.0)
        report = analyze_logs(logs, rope_file=None, seed=0, draws=4000)
        comp = report["comparisons"]["focus_vs_no_path.coverage"]
        assert comp["verdict"] == "equivalent"

    def test_single_strategy_exits_4(self, tmp_path):
        rng_dir = self._fake_logs(tmp_path, shift=0.0)
        for p in rng_dir.glob("episode_s*_no_path.json"):
            p.unlink()
        res = CliRunner().invoke(main, ["analyze", "--logs", str(rng_dir)])
        assert res.exit_code == 4
