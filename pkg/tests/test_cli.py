import csv
import json

import numpy as np
import pytest

from crp import kronlin
from crp.cli import main
from crp.dataio import SynthSpec, synth_dataset, write_matrix_csv
from crp.experiment import parse_config
from crp.errors import ConfigError
from crp.serialize import load_model

SYNTH = {"format": "synthetic",
         "synthetic": {"c": 3, "per_class": 8, "l1": 5, "l2": 4, "noise_sigma": 0.4, "seed": 1}}


def write_config(path, **overrides):
    cfg = {"dataset": SYNTH, "method": "crp",
           "split": {"per_class": 3, "repetitions": 2, "seed": 4},
           "crp": {"lambdas": [0.01, 1.0]}}
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return str(path)


def strip_timings(path):
    s = json.loads(path.read_text())
    s.pop("timings")
    return s


def test_eval_outputs_and_determinism(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert strip_timings(a / "summary.json") == strip_timings(b / "summary.json")
    rows = list(csv.reader((a / "results.csv").open()))
    assert rows[0] == ["lambda", "trial", "accuracy"] and len(rows) == 1 + 2 * 2
    s = json.loads((a / "summary.json").read_text())
    assert s["schema_version"] == 1 and s["config"]["split"]["seed"] == 4
    assert s["best"]["lambda"] in (0.01, 1.0)
    assert len(s["grid"][0]["traces"]) == 2
    assert set(s["timings"]) == {"jobs", "total_seconds", "task_seconds"}
    assert "crp:" in capsys.readouterr().out


def test_seed_override_changes_splits(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    main(["eval", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["eval", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "99"])
    s = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert s["config"]["split"]["seed"] == 99


def test_raw_method_rows(tmp_path):
    cfg = write_config(tmp_path / "c.json", method="raw")
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.reader((tmp_path / "o" / "results.csv").open()))
    assert len(rows) == 1 + 2 and all(r[0] == "" for r in rows[1:])
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "f")]) == 0
    assert not (tmp_path / "f" / "model.json").exists()


@pytest.mark.parametrize("method", ["lda", "twodlda"])
def test_baseline_methods(tmp_path, method):
    cfg = write_config(tmp_path / "c.json", method=method)
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "f")]) == 0
    assert load_model(tmp_path / "f" / "model.json") is not None


def test_fit_writes_crp_model(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "f"), "--lambda", "0.5"]) == 0
    model = load_model(tmp_path / "f" / "model.json")
    assert model.config.lam == 0.5 and model.h == 4


def test_csv_dataset_relative_path(tmp_path):
    d = synth_dataset(SynthSpec(c=2, per_class=6, l1=3, l2=3, seed=2))
    (tmp_path / "data").mkdir()
    write_matrix_csv(d, tmp_path / "data" / "d.csv")
    cfg = write_config(tmp_path / "c.json", dataset={"path": "data/d.csv", "format": "csv"})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_sweeps(tmp_path):
    cfg = write_config(tmp_path / "k.json", crp={"lambdas": [1.0], "k_sweep": [1, 2]})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "k")]) == 0
    assert (tmp_path / "k" / "results_k-1.csv").exists()
    assert (tmp_path / "k" / "results_k-2.csv").exists()
    cfg = write_config(tmp_path / "i.json",
                       crp={"lambdas": [1.0], "init_sweep": [0.5, 1, 2, "random"]})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "i")]) == 0
    s = json.loads((tmp_path / "i" / "summary.json").read_text())
    assert [p["value"] for p in s["sweep"]["points"]] == [0.5, 1, 2, "random"]


def test_trace_command(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "t")]) == 0
    rows = list(csv.reader((tmp_path / "t" / "trace.csv").open()))
    values = [float(r[1]) for r in rows[1:]]
    assert rows[0] == ["iteration", "objective"] and 1 <= len(values) <= 50
    assert all(b >= a * (1 - 1e-9) for a, b in zip(values, values[1:]))
    meta = json.loads((tmp_path / "t" / "trace.json").read_text())
    assert 0 <= meta["pair_index"] < meta["h"]


def test_trace_single_class_is_flat_zero(tmp_path):
    single = dict(SYNTH, synthetic=dict(SYNTH["synthetic"], c=1))
    cfg = write_config(tmp_path / "c.json", dataset=single)
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "t")]) == 0
    rows = list(csv.reader((tmp_path / "t" / "trace.csv").open()))
    assert [float(r[1]) for r in rows[1:]] == [0.0]


def test_check_lemmas_command(tmp_path, capsys):
    assert main(["check-lemmas", "--trials", "50", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("ok") == 6
    payload = json.loads((tmp_path / "lemmas.json").read_text())
    assert payload["trials"] == 50 and len(payload["results"]) == 6


def test_check_lemmas_negative_control(monkeypatch, capsys):
    monkeypatch.setattr(kronlin, "kron", lambda a, b: np.kron(b, a))
    assert main(["check-lemmas", "--trials", "10"]) == 1
    err = capsys.readouterr().err
    assert "Lemma 5" in err


def test_bench_command(tmp_path, capsys):
    cfg = tmp_path / "b.json"
    cfg.write_text(json.dumps({"bench": {"sizes": [[4, 4, 10]], "h": 1, "repeat": 1}}))
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "bench.json").read_text())
    assert {r["kernel"] for r in rows} >= {"side_scatter", "deflate", "nearest_neighbors"}
    assert "speedup" in capsys.readouterr().out


def test_exit_code_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["eval", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["eval", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o")]) == 2
    cfg = write_config(tmp_path / "c.json", method="svm")
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    cfg = write_config(tmp_path / "c.json")
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o"), "--jobs", "0"]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["eval", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_exit_code_data_errors(tmp_path):
    cfg = write_config(tmp_path / "c.json", dataset={"path": "nope.csv"})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    (tmp_path / "bad.csv").write_text("2,2\n0,1,2\n")
    cfg = write_config(tmp_path / "c.json", dataset={"path": "bad.csv"})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    cfg = write_config(tmp_path / "c.json", split={"per_class": 50})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_exit_code_numerical_failure(tmp_path, capsys):
    # lambda 0 with 3 samples per class in 20 dimensions: singular scatter
    cfg = write_config(tmp_path / "c.json", crp={"lambdas": [0.0]})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 4
    assert "trial 0" in capsys.readouterr().err


@pytest.mark.parametrize("raw", [
    [],
    {},
    {"dataset": {"path": "x"}, "extra": 1},
    {"dataset": {"path": "x", "colour": 1}},
    {"dataset": {"format": "synthetic"}},
    {"dataset": {"format": "synthetic", "synthetic": {"c": 0}}},
    {"dataset": {"format": "tiff", "path": "x"}},
    {"dataset": {"path": "x", "downsample": [2]}},
    {"dataset": {"path": "x"}, "crp": {"lambdas": []}},
    {"dataset": {"path": "x"}, "crp": {"lambdas": [-1]}},
    {"dataset": {"path": "x"}, "crp": {"k_sweep": [1], "init_sweep": [1]}},
    {"dataset": {"path": "x"}, "crp": {"init_sweep": ["svd"]}},
    {"dataset": {"path": "x"}, "split": {"per_class": 2, "fraction": 0.5}},
    {"dataset": {"path": "x"}, "jobs": 0},
])
def test_parse_config_rejects(raw):
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_parse_config_defaults():
    cfg = parse_config({"dataset": {"path": "x"}})
    assert cfg.method == "crp" and cfg.split.per_class == 10 and cfg.split.repetitions == 5
    assert cfg.crp.k == 2 and cfg.crp.h is None
    assert list(cfg.crp.lambdas) == [1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6]
