import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from bpfrls.harness import io
from bpfrls.harness.cli import main
from bpfrls.harness.config import ConfigError, build_model, load_config, preset_names, true_theta
from bpfrls.harness.runner import compare, make_dataset, montecarlo, run_experiment, simulate_experiment
from bpfrls.rng import GENERATOR_ID

SMALL = {"data": {"length": 120, "sigma_v": [0.8]}, "estimator": {"particles": 50}}


def small(preset="example1", **extra):
    over = {"data": dict(SMALL["data"]), "estimator": dict(SMALL["estimator"])}
    for key, val in extra.items():
        over.setdefault(key, {}).update(val) if isinstance(val, dict) else over.__setitem__(key, val)
    return load_config(preset=preset, overrides=over)


def data_rows(path):
    header, rows = io.read_csv(path)
    return header, np.array(rows, dtype=object)


class TestPresets:
    def test_names(self):
        assert preset_names() == ["example1", "example2", "example3"]

    def test_example1_text_default(self):
        cfg = load_config(preset="example1")
        np.testing.assert_array_equal(true_theta(cfg), [0.30, -0.25, 0.10, 0.15, 0.30, 0.20, 1.15, 1.56, -0.14, 0.20])
        assert cfg["estimator"]["particles"] == 1002 and cfg["data"]["length"] == 3000
        assert cfg["report"]["checkpoints"] == [100, 1000, 3000]

    def test_example1_table_variant(self):
        cfg = load_config(preset="example1", overrides={"model": {"variant": "table"}})
        theta = true_theta(cfg)
        assert theta[3] == 0.14 and theta[9] == 0.01

    def test_example2_table_default(self):
        cfg = load_config(preset="example2")
        m = build_model(cfg)
        assert m.B[2, 0] == 0.40 and true_theta(cfg).size == 25
        assert cfg["estimator"]["particles"] == 217
        text = load_config(preset="example2", overrides={"model": {"variant": "text"}})
        assert build_model(text).B[2, 0] == 0.10

    def test_example3(self):
        cfg = load_config(preset="example3")
        theta = true_theta(cfg)
        assert theta[0] == 0.2773 and theta[1] == -0.0190
        assert cfg["report"]["checkpoints"] == [100, 1000, 2000, 5000]
        assert cfg["data"]["holdout"] == 100


class TestConfigValidation:
    @pytest.mark.parametrize("over", [
        {"data": {"length": 0}},
        {"data": {"sigma_v": []}},
        {"data": {"sigma_v": [-1.0]}},
        {"estimator": {"weight_mode": "bogus"}},
        {"estimator": {"kind": "ekf"}},
        {"estimator": {"particles": 0}},
        {"model": {"variant": "nope"}},
        {"model": {"sigma_w": [0.1]}},
        {"seed": -1},
    ])
    def test_rejects(self, over):
        with pytest.raises(ConfigError):
            load_config(preset="example1", overrides=over)

    def test_model_required(self):
        with pytest.raises(ConfigError):
            load_config()

    def test_plain_model(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump({
            "model": {"a": [0.5], "B": [[0.1]], "f": [1.0], "sigma_w": [0.01]},
            "data": {"length": 50, "sigma_v": [0.2]},
        }))
        cfg = load_config(path)
        assert true_theta(cfg).tolist() == [0.5, 0.1, 1.0]

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_config(preset="example9")


class TestRunExperiment:
    def test_files_and_summary(self, tmp_path):
        cfg = small(report={"checkpoints": [10, 100]})
        run_experiment(cfg, tmp_path)
        cell = tmp_path / "sigma_v_0.8"
        for name in ("dataset.csv", "theta.csv", "states.csv", "noises.csv", "summary.csv", "metadata.json"):
            assert (cell / name).exists()
        header, rows = data_rows(cell / "summary.csv")
        assert header == io.columns("summary", 2, 2)
        assert [r[0] for r in rows] == ["", "10", "100", "120"]
        header, rows = data_rows(cell / "theta.csv")
        assert len(rows) == 120 and header[-2:] == ["delta_theta", "filter_scale"]

    def test_provenance_in_every_file(self, tmp_path):
        run_experiment(small(seed=7), tmp_path)
        for path in tmp_path.rglob("*.csv"):
            text = path.read_text()
            assert f"# generator_id: {GENERATOR_ID}" in text
            assert "# seeds: " in text and '"data": 7' in text
            assert "# config: " in text
        meta = json.loads((tmp_path / "sigma_v_0.8" / "metadata.json").read_text())
        assert meta["seeds"] == {"data": 7, "filter": 7}
        assert meta["model_variant"] == "text" and meta["generator_id"] == GENERATOR_ID
        assert meta["config"]["seed"] == 7

    def test_rfc4180_crlf(self, tmp_path):
        run_experiment(small(), tmp_path)
        raw = (tmp_path / "sweep.csv").read_bytes()
        assert raw.count(b"\r\n") == raw.count(b"\n")

    def test_holdout_prediction(self, tmp_path):
        cfg = small("example3", data={"holdout": 20, "length": 150})
        run_experiment(cfg, tmp_path)
        header, rows = data_rows(tmp_path / "sigma_v_0.8" / "prediction.csv")
        assert header == ["t", "u", "y", "y_clean", "y_hat"] and len(rows) == 20
        assert rows[0][0] == "150"

    def test_schema_stable(self, tmp_path):
        run_experiment(small(), tmp_path)
        for name, ftype in (("states.csv", "states"), ("noises.csv", "noises"), ("dataset.csv", "dataset")):
            header, _ = io.read_csv(tmp_path / "sigma_v_0.8" / name)
            assert header == io.columns(ftype, 2, 2)

    def test_byte_identical_rerun(self, tmp_path):
        run_experiment(small(), tmp_path / "a")
        run_experiment(small(), tmp_path / "b")
        for path in (tmp_path / "a").rglob("*"):
            if path.is_file():
                assert path.read_bytes() == (tmp_path / "b" / path.relative_to(tmp_path / "a")).read_bytes()

    def test_jobs_do_not_change_output(self, tmp_path):
        cfg = small(data={"sigma_v": [0.45, 0.8]})
        run_experiment(cfg, tmp_path / "a", jobs=1)
        run_experiment(cfg, tmp_path / "b", jobs=2)
        for path in (tmp_path / "a").rglob("*.csv"):
            assert path.read_bytes() == (tmp_path / "b" / path.relative_to(tmp_path / "a")).read_bytes()

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(io.OutputError):
            run_experiment(small(), blocker / "out")


class TestSimulate:
    def test_common_random_numbers(self, tmp_path):
        cfg = small(data={"sigma_v": [0.45, 0.9]})
        simulate_experiment(cfg, tmp_path)
        lo, hi = make_dataset(cfg, 0.45, 0), make_dataset(cfg, 0.9, 0)
        np.testing.assert_allclose(hi.traj.v, 2 * lo.traj.v)
        np.testing.assert_array_equal(hi.traj.u, lo.traj.u)
        assert (tmp_path / "sigma_v_0.45" / "dataset.csv").exists()


class TestCompare:
    def test_same_data_side_by_side(self, tmp_path):
        compare(small(), tmp_path)
        cell = tmp_path / "sigma_v_0.8"
        header, rows = data_rows(cell / "compare.csv")
        assert header == ["t", "delta_bpfrls", "delta_bsorls"] and len(rows) == 120
        a = (cell / "bpfrls" / "dataset.csv").read_bytes()
        assert a == (cell / "bsorls" / "dataset.csv").read_bytes()
        assert json.loads((cell / "metadata.json").read_text())["same_data"] is True

    def test_single_estimator_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            compare(small(compare={"estimators": ["bpfrls"]}), tmp_path)
        assert not any(tmp_path.iterdir())

    def test_data_override_rejected(self, tmp_path):
        cfg = small(compare={"estimators": ["bpfrls", {"kind": "bsorls", "length": 50}]})
        with pytest.raises(ConfigError, match="mismatched data specs"):
            compare(cfg, tmp_path)

    def test_weight_mode_labels(self, tmp_path):
        cfg = small(compare={"estimators": [{"kind": "bpfrls", "weight_mode": "known-r"},
                                            {"kind": "bpfrls", "weight_mode": "dwo"}]})
        compare(cfg, tmp_path)
        header, _ = io.read_csv(tmp_path / "sigma_v_0.8" / "compare_summary.csv")
        assert header == ["samples", "delta_pct_bpfrls-known-r", "delta_pct_bpfrls-dwo"]

    def test_byte_identical(self, tmp_path):
        compare(small(), tmp_path / "a")
        compare(small(), tmp_path / "b")
        a = (tmp_path / "a" / "sigma_v_0.8" / "compare.csv").read_bytes()
        assert a == (tmp_path / "b" / "sigma_v_0.8" / "compare.csv").read_bytes()


class TestMonteCarlo:
    def test_example2_table(self, tmp_path):
        cfg = small("example2", data={"length": 80, "sigma_v": [0.3]}, estimator={"particles": 20})
        montecarlo(cfg, tmp_path, runs=3)
        header, rows = data_rows(tmp_path / "sigma_v_0.3" / "mc_summary.csv")
        assert header == ["parameter", "true", "mean", "mad", "rmsd"] and len(rows) == 25
        _, runs = data_rows(tmp_path / "sigma_v_0.3" / "mc_runs.csv")
        assert [r[1] for r in runs] == ["0", "1", "2"]

    def test_identical_seeds_zero_mad(self, tmp_path):
        cfg = small(montecarlo={"seed_stride": 0})
        montecarlo(cfg, tmp_path, runs=2)
        _, rows = data_rows(tmp_path / "sigma_v_0.8" / "mc_summary.csv")
        assert all(float(r[3]) == 0.0 for r in rows)

    def test_one_run_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            montecarlo(small(), tmp_path, runs=1)


class TestCli:
    def test_preset_list(self, capsys):
        assert main(["preset", "list"]) == 0
        assert "example2" in capsys.readouterr().out

    def test_preset_show(self, capsys):
        assert main(["preset", "show", "example3"]) == 0
        assert yaml.safe_load(capsys.readouterr().out)["name"] == "example3"

    def test_identify_flags(self, tmp_path):
        rc = main(["identify", "--preset", "example1", "--length", "60", "--particles", "30",
                   "--sigma-v", "0.5", "--seed", "4", "--weight-mode", "dwo", "--out", str(tmp_path)])
        assert rc == 0
        meta = json.loads((tmp_path / "sigma_v_0.5" / "metadata.json").read_text())
        assert meta["estimator"]["N"] == 30 and meta["estimator"]["weight_mode"] == "dwo"
        assert meta["seeds"]["data"] == 4

    def test_invalid_length_writes_nothing(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["identify", "--preset", "example1", "--length", "0", "--out", str(out)]) == 2
        assert not out.exists()
        assert "length" in capsys.readouterr().err

    def test_montecarlo_one_run(self, tmp_path):
        assert main(["montecarlo", "--preset", "example1", "--runs", "1", "--out", str(tmp_path / "m")]) == 2

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "bpfrls", "preset", "list"], capture_output=True, text=True)
        assert proc.returncode == 0 and "example1" in proc.stdout
