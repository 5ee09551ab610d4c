"""Experiment orchestration: determinism, coverage behavior, CLI contract."""

import json
import math
import os
import subprocess
import sys

import pytest

from gridcp import cli
from gridcp.harness import (
    ExperimentConfig,
    emit,
    run_bayes_triangle,
    run_coverage,
    run_diagram,
    run_eposterior,
    run_experiment,
    run_ihdr_oracle,
    wilson_lower_bound,
)


class TestWilson:
    def test_full_hits(self):
        assert 0.94 < wilson_lower_bound(100, 100) < 1.0

    def test_monotone_in_hits(self):
        assert wilson_lower_bound(90, 100) > wilson_lower_bound(80, 100)

    def test_below_point_estimate(self):
        assert wilson_lower_bound(90, 100) < 0.9

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            wilson_lower_bound(0, 0)


class TestConfig:
    def test_tie_alpha_rejected_for_coverage(self):
        with pytest.raises(ValueError, match="attainable"):
            ExperimentConfig(experiment="coverage", alpha=0.5, n=19)

    def test_off_tie_alpha_accepted(self):
        cfg = ExperimentConfig(experiment="coverage", alpha=0.5, n=20)
        assert cfg.alpha == 0.5  # 0.5 is not of the form k/21

    def test_unknown_experiment(self):
        with pytest.raises(ValueError, match="unknown experiment"):
            ExperimentConfig(experiment="nope")

    def test_from_json_obj(self):
        cfg = ExperimentConfig.from_json_obj(
            {
                "experiment": "coverage",
                "seed": 7,
                "trials": 50,
                "alpha": 0.13,
                "n": 10,
                "grid": {"bounds": [[-4, 4]], "counts": [51]},
                "scenario": "iid_uniform",
            }
        )
        assert cfg.seed == 7
        assert cfg.grid_counts == (51,)
        assert cfg.scenario == "iid_uniform"


class TestCoverage:
    def test_small_gaussian_run(self):
        cfg = ExperimentConfig(
            experiment="coverage",
            seed=1,
            trials=200,
            alpha=0.13,
            n=20,
            grid_bounds=((-6.0, 6.0),),
            grid_counts=(201,),
        )
        rep = run_coverage(cfg)
        assert rep["hits"] <= rep["trials"]
        assert rep["empirical_coverage"] == rep["hits"] / rep["trials"]
        assert rep["pass"]

    def test_alpha_below_plausibility_floor_covers_everything(self):
        # pi >= 1/(n+1) = 1/21 > 0.009, so the region is the full grid and
        # every trial hits.
        cfg = ExperimentConfig(
            experiment="coverage",
            seed=2,
            trials=60,
            alpha=0.009,
            n=20,
            grid_counts=(101,),
        )
        rep = run_coverage(cfg)
        assert rep["hits"] == rep["trials"]

    def test_exchangeable_mixture_respects_bound(self):
        cfg = ExperimentConfig(
            experiment="coverage",
            seed=3,
            trials=400,
            alpha=0.13,
            n=15,
            grid_bounds=((-9.0, 9.0),),
            grid_counts=(201,),
            scenario="exchangeable_mixture",
        )
        rep = run_coverage(cfg)
        slack = 3.0 * math.sqrt(0.13 * 0.87 / 400)
        assert rep["empirical_coverage"] >= 0.87 - slack

    def test_uniform_scenario_runs(self):
        cfg = ExperimentConfig(
            experiment="coverage",
            seed=4,
            trials=100,
            alpha=0.23,
            n=10,
            grid_bounds=((-4.0, 4.0),),
            grid_counts=(101,),
            scenario="iid_uniform",
        )
        assert run_coverage(cfg)["pass"]

    def test_prototype_score_respects_bound(self):
        # The guarantee is score-free; the embedding score must satisfy it too.
        cfg = ExperimentConfig(
            experiment="coverage",
            seed=12,
            trials=300,
            alpha=0.23,
            n=10,
            grid_bounds=((-4.0, 4.0),),
            grid_counts=(101,),
            score="prototype_embedding",
        )
        rep = run_coverage(cfg)
        assert rep["score"] == "prototype_embedding"
        assert rep["pass"]


class TestCampaignsSmall:
    def test_diagram_small(self):
        cfg = ExperimentConfig(
            experiment="diagram",
            seed=5,
            trials=25,
            extras={"brute_trials": 10},
        )
        rep = run_diagram(cfg)
        assert rep["pass"]
        for fam in rep["families"]:
            assert fam["equal"] == 25
            assert fam["brute_checked"] == 10
            assert fam["brute_equal"] == 10

    def test_bayes_triangle_small(self):
        rep = run_bayes_triangle(
            ExperimentConfig(experiment="bayes_triangle", seed=6, trials=20)
        )
        assert rep["equal"] == 20
        assert rep["counterexamples"] == []

    def test_ihdr_oracle_small(self):
        rep = run_ihdr_oracle(ExperimentConfig(experiment="ihdr_oracle", seed=7, trials=40))
        assert rep["pass"]

    def test_eposterior_small_grids(self):
        rep = run_eposterior(
            ExperimentConfig(
                experiment="eposterior",
                seed=8,
                trials=1,
                extras={"theta_count": 31, "y_count": 31},
            )
        )
        assert rep["pass"]
        families = {r["family"]: r for r in rep["records"]}
        assert families["conforming"]["condition_holds"]
        assert not families["violating"]["condition_holds"]
        assert families["violating"]["max_evalue_expectation"] > 1.0


class TestDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="coverage", seed=9, trials=50, alpha=0.13, n=8, grid_counts=(51,)
        )
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        emit(run_coverage(cfg), str(p1))
        emit(run_coverage(cfg), str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_worker_count_invariance(self, tmp_path, monkeypatch):
        cfg = ExperimentConfig(
            experiment="coverage", seed=9, trials=50, alpha=0.13, n=8, grid_counts=(51,)
        )
        serial = run_coverage(cfg)
        monkeypatch.setenv("CK_THREADS", "4")
        threaded = run_coverage(cfg)
        assert serial == threaded

    def test_csv_emission(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="coverage", seed=10, trials=20, alpha=0.13, n=5, grid_counts=(31,)
        )
        path = tmp_path / "rep.csv"
        emit(run_coverage(cfg), str(path), format="csv")
        text = path.read_text()
        assert text.startswith("key,value\n")
        assert "empirical_coverage" in text

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="format"):
            emit({"a": 1}, str(tmp_path / "x"), format="yaml")


class TestCli:
    def test_pass_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code = cli.main(
            ["coverage", "--seed", "11", "--trials", "30", "--out", str(out)]
        )
        assert code == 0
        assert json.loads(out.read_text())["pass"] is True
        assert "PASS" in capsys.readouterr().out

    def test_config_file_with_overrides(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "experiment": "coverage",
                    "seed": 1,
                    "trials": 500,
                    "alpha": 0.23,
                    "n": 10,
                    "grid": {"bounds": [[-5, 5]], "counts": [51]},
                }
            )
        )
        out = tmp_path / "r.json"
        code = cli.main(
            [
                "coverage",
                "--config",
                str(cfg_path),
                "--trials",
                "40",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        rep = json.loads(out.read_text())
        assert rep["trials"] == 40  # CLI override wins
        assert rep["alpha"] == 0.23

    def test_bad_config_exit_two(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"alpha": 0.5, "n": 19}))
        code = cli.main(["coverage", "--config", str(cfg_path)])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file_exit_two(self):
        assert cli.main(["coverage", "--config", "/nonexistent.json"]) == 2

    def test_counterexample_exit_one(self, monkeypatch):
        monkeypatch.setitem(
            cli.EXPERIMENTS, "coverage", lambda cfg: {"pass": False, "seed": cfg.seed}
        )
        assert cli.main(["coverage", "--trials", "5"]) == 1

    def test_entry_point_installed(self):
        proc = subprocess.run(
            [sys.executable, "-m", "gridcp.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "experiment" in proc.stdout
