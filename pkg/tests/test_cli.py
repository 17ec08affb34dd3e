import copy
import json
from pathlib import Path

import pytest

from aaklab import cli, rational
from aaklab.cli import ConfigError, ExperimentConfig, main, run_pipeline, validate

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = {
    "measure": {"intervals": [{"a": -0.5, "b": 0.5, "density": "1"}], "poles": []},
    "methods": ["aak", "rational-l2"],
    "degrees": [3, 4, 5, 6, 7],
    "truncation_N": 64,
    "panels_M": 200,
    "probes": [[0, 0.9], [0, 2]],
    "output_dir": "out",
    "seed": 0,
}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def config(**changes):
    data = copy.deepcopy(SMALL)
    data.update(changes)
    return ExperimentConfig.from_dict(data)


def test_validate_examples():
    assert validate(ExperimentConfig.load(CONFIGS / "three_interval.json")) == []
    assert validate(ExperimentConfig.load(CONFIGS / "markov_uniform.json")) == []
    assert any("truncation_N" in v for v in validate(config(truncation_N=10, degrees=[13])))
    assert any("degrees" in v for v in validate(config(degrees=[])))
    bad = copy.deepcopy(SMALL["measure"])
    bad["poles"] = [{"eta": [1.2, 0.0], "coeffs": [[1.0, 0.0]]}]
    assert any("measure" in v for v in validate(config(measure=bad)))


@pytest.mark.parametrize("changes, word", [
    ({"degrees": [5, 3]}, "sorted"),
    ({"degrees": [0, 2]}, "positive"),
    ({"methods": ["pade"]}, "unknown methods"),
    ({"panels_M": 20}, "panels_M"),
    ({"seed": -1}, "seed"),
    ({"probes": [[0.1, 0.0]]}, "support"),
    ({"probes": [[3.0, 0.0]]}, "reflected"),
])
def test_validate_reports(changes, word):
    assert any(word in v for v in validate(config(**changes)))


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "colour": "red"})


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", "--config", write_config(tmp_path, SMALL)]) == 0
    assert json.loads(capsys.readouterr().out) == {"violations": []}
    assert main(["validate", "--config", write_config(tmp_path, {**SMALL, "degrees": []})]) == 1


def test_run_rejects_invalid_config(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(tmp_path, {**SMALL, "truncation_N": 10})
    assert main(["run", "--config", path, "--out", str(out)]) == 1
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "validation" and record["exit_code"] == 1
    assert record["violations"]
    assert not out.exists()


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert main(["run", "--config", str(path)]) == 1


def test_missing_config_is_io_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "io"


def test_numerical_failure(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise rational.OptimizationError("synthetic failure")
    monkeypatch.setattr(rational, "multistart", boom)
    out = tmp_path / "out"
    assert main(["run", "--config", write_config(tmp_path, SMALL), "--out", str(out)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "numerical"
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [tmp_path / "config.json"]


def test_aak_path_never_calls_the_optimizer(monkeypatch):
    def boom(*args, **kwargs):
        raise AssertionError("optimizer called")
    monkeypatch.setattr(rational, "multistart", boom)
    monkeypatch.setattr(rational, "optimize_denominator", boom)
    files = run_pipeline(config(methods=["aak"]))
    assert "approximants/aak_5.json" in files
    assert not any("rational-l2" in k for k in files)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    out = tmp / "out"
    assert main(["run", "--config", write_config(tmp, SMALL), "--out", str(out), "--trace"]) == 0
    return out


def test_run_outputs(small_run):
    names = {p.relative_to(small_run).as_posix() for p in small_run.rglob("*") if p.is_file()}
    for required in ("moments.json", "equilibrium.csv", "errors.csv", "rates.csv", "diagnostics.json",
                     "summary.json"):
        assert required in names
    for n in SMALL["degrees"]:
        assert f"approximants/aak_{n}.json" in names
        assert f"approximants/rational-l2_{n}.json" in names
    assert any(name.startswith("traces/") for name in names)
    summary = json.loads((small_run / "summary.json").read_text())
    assert summary["capacity"] > 0
    assert 0 < summary["predicted_rate"] < 1
    assert (small_run / "rates.csv").read_text().splitlines()[0] == "method,n,error,root_rate,predicted,used"


def test_run_is_reproducible(small_run, tmp_path):
    out = tmp_path / "again"
    assert main(["run", "--config", write_config(tmp_path, SMALL), "--out", str(out), "--threads", "3",
                 "--trace"]) == 0
    for path in small_run.rglob("*"):
        if path.is_file():
            assert (out / path.relative_to(small_run)).read_bytes() == path.read_bytes(), path


def test_run_replaces_previous_output(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / "stale.txt").write_text("old")
    cfg = {**SMALL, "methods": ["aak"]}
    assert main(["run", "--config", write_config(tmp_path, cfg), "--out", str(out)]) == 0
    assert not (out / "stale.txt").exists()


@pytest.mark.parametrize("command", ["moments", "equilibrium", "approx", "diagnose"])
def test_stage_subcommands(tmp_path, capsys, command):
    assert main([command, "--config", write_config(tmp_path, SMALL)]) == 0
    assert json.loads(capsys.readouterr().out)


def test_bad_thread_count(tmp_path):
    assert main(["run", "--config", write_config(tmp_path, SMALL), "--threads", "0"]) == 1


def test_module_exports():
    assert callable(cli.main)
