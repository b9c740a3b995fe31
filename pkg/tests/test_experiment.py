"""
Tests for the experiment runner and the command-line interface.
"""

import json
from pathlib import Path

import pytest

from bdris.errors import NumericalError
from bdris.scripts.cli import main
from bdris.services.experiment_service import ConfigError, ExperimentService, SolverError, load_config
from bdris.services.export_service import ExportService

EXPERIMENTS_DIR = Path(__file__).resolve().parent.parent / "experiments"


def write_config(tmp_path, **overrides):
    doc = {
        "name": "scaling-small",
        "kind": "scaling",
        "seed": 3,
        "trials": 50,
        "sweep": {"axis": "m", "values": [2, 4]},
    }
    doc.update(overrides)
    path = tmp_path / f"{doc['name']}.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "missing.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_sweep_axis(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, sweep={"axis": "bits", "values": [1]}))

    def test_unknown_solver(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, solvers=["exhaustive"]))

    def test_unsorted_sweep(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, sweep={"axis": "m", "values": [4, 2]}))


class TestRunExperiment:
    def test_same_seed_same_output(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        exporter = ExportService(output_dir=str(tmp_path))
        first = exporter.generate_csv(ExperimentService(threads=1).run_experiment(cfg))
        second = exporter.generate_csv(ExperimentService(threads=1).run_experiment(cfg))
        assert first == second

    def test_thread_count_does_not_change_results(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        serial = ExperimentService(threads=1).run_experiment(cfg)
        pooled = ExperimentService(threads=4).run_experiment(cfg)
        assert serial.rows == pooled.rows
        assert pooled.metadata["threads"] == 4

    def test_scaling_matches_theory(self, tmp_path):
        cfg = load_config(write_config(tmp_path, trials=4000, sweep={"axis": "m", "values": [4, 8]}))
        result = ExperimentService(threads=1).run_experiment(cfg)
        for row in result.rows:
            for solver in ("dris", "unitary"):
                assert row[f"{solver}_mean"] / row[f"{solver}_theory"] == pytest.approx(1.0, abs=0.05)

    def test_bundled_scaling_experiment(self):
        cfg = load_config(EXPERIMENTS_DIR / "scaling.json")
        assert cfg.trials == 10000
        assert cfg.sweep.values[-1] == 64

        result = ExperimentService().run_experiment(cfg)
        assert result.metadata["wall_time_s"] < 120
        for row in result.rows:
            for solver in ("dris", "unitary"):
                assert 0.98 <= row[f"{solver}_mean"] / row[f"{solver}_theory"] <= 1.02

    def test_row_layout_and_metadata(self, tmp_path):
        cfg = load_config(write_config(tmp_path, trials=5))
        result = ExperimentService(threads=1).run_experiment(cfg)
        assert result.columns == [
            "sweep_value",
            "dris_mean",
            "dris_stderr",
            "dris_theory",
            "unitary_mean",
            "unitary_stderr",
            "unitary_theory",
        ]
        assert [row["sweep_value"] for row in result.rows] == [2, 4]
        for key in ("name", "kind", "seed", "trials", "versions", "generated_at", "wall_time_s"):
            assert key in result.metadata

    def test_group_sweep(self, tmp_path):
        cfg = load_config(
            write_config(
                tmp_path,
                name="group",
                kind="group",
                trials=20,
                params={"m": 8},
                sweep={"axis": "groupSize", "values": [1, 2, 8]},
            )
        )
        rows = ExperimentService(threads=1).run_experiment(cfg).rows
        means = [row["group_mean"] for row in rows]
        assert means == sorted(means)
        assert rows[-1]["group_theory"] == pytest.approx(64.0)

    def test_estimation_against_theory(self, tmp_path):
        cfg = load_config(
            write_config(
                tmp_path,
                name="estimation",
                kind="estimation",
                trials=500,
                params={"m": 4, "groupSize": 2, "n": 2},
                sweep={"axis": "sigma2", "values": [0.1, 1.0]},
            )
        )
        for row in ExperimentService(threads=1).run_experiment(cfg).rows:
            assert row["ls_theory"] == pytest.approx(2 * 2 * row["sweep_value"])
            assert row["ls_mean"] / row["ls_theory"] == pytest.approx(1.0, abs=0.1)

    def test_miso_has_no_closed_form(self, tmp_path):
        cfg = load_config(
            write_config(tmp_path, name="miso", kind="miso", trials=3, params={"m": 4, "n": 2}, sweep={"axis": "power", "values": [1.0]})
        )
        row = ExperimentService(threads=1).run_experiment(cfg).rows[0]
        assert row["dris_theory"] is None
        assert row["dris_mean"] > 0 and row["unitary_mean"] > 0

    def test_codebook_never_beats_continuous(self, tmp_path):
        cfg = load_config(
            write_config(
                tmp_path,
                name="codebook",
                kind="codebook",
                trials=3,
                params={"m": 4, "trainSize": 10, "sweeps": 5},
                sweep={"axis": "bits", "values": [1, 2]},
            )
        )
        for row in ExperimentService(threads=1).run_experiment(cfg).rows:
            assert row["discrete_mean"] <= row["continuous_mean"] * (1 + 1e-9)

    def test_coupling_runs_once(self, tmp_path):
        cfg = load_config(
            write_config(
                tmp_path,
                name="coupling",
                kind="coupling",
                trials=100,
                solvers=["isotropic"],
                params={"m": 4},
                sweep={"axis": "spacing", "values": [0.25, 0.5]},
            )
        )
        rows = ExperimentService(threads=1).run_experiment(cfg).rows
        assert all(row["isotropic_stderr"] == 0.0 for row in rows)
        assert all(row["isotropic_mean"] > 0 for row in rows)

    def test_invalid_parameter_is_a_config_error(self, tmp_path):
        cfg = load_config(write_config(tmp_path, kind="group", params={"m": 6}, sweep={"axis": "groupSize", "values": [4]}))
        with pytest.raises(ConfigError):
            ExperimentService(threads=1).run_experiment(cfg)

    def test_solver_failure_carries_trial_index(self, tmp_path):
        class FailingOptimizer:
            def get_siso_solver(self, name):
                def solve(h_ri, h_it):
                    raise NumericalError("solver diverged")

                return solve

        cfg = load_config(write_config(tmp_path, trials=2))
        service = ExperimentService(threads=1)
        service.optimizer = FailingOptimizer()
        with pytest.raises(SolverError) as info:
            service.run_experiment(cfg)
        assert info.value.trial_index == 0


class TestCli:
    def test_missing_config(self, capsys):
        assert main(["simulate", "missing.json"]) == 1
        assert "missing.json" in capsys.readouterr().err

    def test_analyze_scaling(self, capsys):
        assert main(["analyze", "--law", "scaling", "--m", "64"]) == 0
        assert "4096" in capsys.readouterr().out

    def test_analyze_complexity(self, capsys):
        assert main(["analyze", "--law", "complexity", "--m", "64"]) == 0
        assert "484" in capsys.readouterr().out

    def test_selftest(self):
        assert main(["selftest"]) == 0

    def test_simulate_writes_output(self, tmp_path):
        config = write_config(tmp_path, trials=5)
        target = tmp_path / "out.csv"
        assert main(["simulate", str(config), "--out", str(target), "--threads", "1"]) == 0
        assert target.read_text(encoding="utf-8").startswith("sweep_value,dris_mean")

    def test_simulate_to_stdout_as_json(self, tmp_path, capsys):
        config = write_config(tmp_path, trials=5)
        assert main(["simulate", str(config), "--format", "json", "--seed", "9"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["metadata"]["seed"] == 9
        assert len(doc["rows"]) == 2

    def test_optimize_random_channel(self, capsys):
        assert main(["optimize", "--solver", "tree", "--m", "6", "--seed", "4"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["optimalityRatio"] == pytest.approx(1.0, abs=1e-8)

    def test_optimize_missing_channel(self):
        assert main(["optimize", "--channel", "nowhere.json"]) == 1

    def test_usage_errors(self):
        assert main([]) == 1
        assert main(["analyze", "--law", "unknown"]) == 1


@pytest.mark.parametrize("path", sorted(EXPERIMENTS_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_configs_validate(path):
    cfg = load_config(path)
    assert cfg.name == path.stem
