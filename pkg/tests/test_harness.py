import csv

import numpy as np
import pytest

from risota import harness
from risota.cli import main
from risota.data import load_idx
from risota.exceptions import ConfigurationError, OutputError
from risota.harness import ExperimentConfig, run_experiment

FAST = dict(dataset="synthetic", n_clients=4, n_elements=4, n_rounds=2, seeds=[0],
            synthetic_per_class=20, tau_max=2)


def write_config(path, **kw):
    def value(v):
        if isinstance(v, str):
            return f'"{v}"'
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, list):
            return "[" + ", ".join(value(x) for x in v) + "]"
        return repr(v)
    path.write_text("".join(f"{k} = {value(v)}\n" for k, v in kw.items()))
    return path


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_config_file_and_validation(tmp_path):
    cfg = ExperimentConfig.from_file(write_config(tmp_path / "c.toml", **FAST))
    assert cfg.n_rounds == 2 and cfg.dataset == "synthetic"
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(write_config(tmp_path / "u.toml", bogus=1))
    (tmp_path / "n.toml").write_text("[block]\nx = 1\n")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(tmp_path / "n.toml")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(algorithms=["charles"])
    with pytest.raises(ConfigurationError):
        ExperimentConfig(est_var_ratio=-1)


def test_single_round_rows(tmp_path):
    cfg = ExperimentConfig(**{**FAST, "n_rounds": 1, "seeds": [0, 1], "algorithms": ["roar_fed"]})
    run_experiment(cfg, tmp_path)
    rows = read_rows(tmp_path / "metrics.csv")
    assert [(r["seed"], r["round"]) for r in rows] == [("0", "0"), ("1", "0")]
    assert list(rows[0]) == list(harness.METRICS_COLUMNS)
    assert len(read_rows(tmp_path / "bounds.csv")) == 2


def test_sweep_groups(tmp_path):
    cfg = ExperimentConfig(**{**FAST, "n_elements_sweep": [2, 4, 8], "algorithms": ["roar_fed"]})
    run_experiment(cfg, tmp_path, sweep=True)
    rows = read_rows(tmp_path / "fig_accuracy_vs_N.csv")
    assert [r["n_elements"] for r in rows] == ["2", "4", "8"]
    for r in read_rows(tmp_path / "bounds.csv"):
        for term in ("optimization_error", "channel_noise_error", "local_update_error",
                     "statistical_error", "channel_estimation_error"):
            assert float(r[term]) >= 0


def test_deterministic_bytes_and_threads(tmp_path):
    cfg = ExperimentConfig(**{**FAST, "seeds": [0, 1]})
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    run_experiment(cfg, tmp_path / "c", threads=3)
    ref = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert ref == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert ref == (tmp_path / "c" / "metrics.csv").read_bytes()


def test_unwritable_output_fails_before_compute(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    monkeypatch.setattr(harness, "run_cell", lambda *a: pytest.fail("computed"))
    with pytest.raises(OutputError):
        run_experiment(ExperimentConfig(**FAST), blocker / "out")


def test_rounds_to_target():
    assert harness.rounds_to_target([0.1, 0.6, 0.7]) == 2
    assert harness.rounds_to_target([0.1, 0.2]) is None


def test_cli_run_bound_and_fixtures(tmp_path):
    cfg = write_config(tmp_path / "c.toml", **FAST)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    assert {r["seed"] for r in read_rows(out / "metrics.csv")} == {"5"}
    before = (out / "bounds.csv").read_bytes()
    (out / "bounds.csv").unlink()
    assert main(["bound", "--out", str(out)]) == 0
    assert (out / "bounds.csv").read_bytes() == before

    fx = tmp_path / "fx"
    assert main(["gen-fixtures", "--config", str(cfg), "--out", str(fx)]) == 0
    train = load_idx(fx / "train-images-idx3-ubyte", fx / "train-labels-idx1-ubyte")
    assert train.features.shape == (64, 16) and np.all(np.bincount(train.labels) == 16)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", str(write_config(tmp_path / "b.toml", nope=1))]) == 2
    assert main(["bound", "--out", str(tmp_path / "empty")]) == 10
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write_config(tmp_path / "c.toml", **FAST)
    assert main(["run", "--config", str(cfg), "--out", str(blocker / "o")]) == 7
    assert main(["run", "--threads", "0"]) == 2
    assert "error:" in capsys.readouterr().err
