import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mhmm import Categorical, HmmParams, MixtureModel, save_model
from mhmm.cli import main

LIBRAS = Path(__file__).resolve().parents[1] / "data" / "movement_libras.data"
REPORT_FIELDS = {"schema", "v_measure", "entropy", "iterations", "final_log_likelihood", "seed",
                 "config", "converged", "log_likelihood_history", "assignments", "gate_decisions"}


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    path = tmp_path_factory.mktemp("synth") / "data.json"
    assert main(["synth", "--n-per-component", "8", "--length", "60", "--seed", "1",
                 "--out", str(path)]) == 0
    return path


def _fit(synth, out, *extra):
    return main(["fit", "--data", str(synth), "--k", "2", "--states", "3", "--seed", "3",
                 "--out", str(out), *extra])


def test_fit_writes_model_and_report(synth, tmp_path, capsys):
    assert _fit(synth, tmp_path, "--method", "informational") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert REPORT_FIELDS <= set(report)
    assert report["config"]["method"] == "informational"
    assert report["config"]["resolved_lambda"] == 60.0
    model = json.loads((tmp_path / "model.json").read_text())
    assert model["num_components"] == 2
    assert "iterations=" in capsys.readouterr().out


def test_lambda_below_one_is_a_config_error(synth, tmp_path, capsys):
    assert _fit(synth, tmp_path, "--method", "informational", "--lambda", "0") == 2
    assert "lambda" in capsys.readouterr().err
    assert not (tmp_path / "report.json").exists()


def test_missing_data_file_is_a_config_error(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "nope.json"), "--k", "2", "--states", "2"]) == 2


def test_numerical_failure_exit_code(synth, tmp_path, monkeypatch, capsys):
    import mhmm.cli
    from mhmm import UnderflowError

    def failing_fit(*args, **kwargs):
        raise UnderflowError("iteration 2: zero likelihood", step=0, sequence=1)

    monkeypatch.setattr(mhmm.cli, "fit", failing_fit)
    assert _fit(synth, tmp_path) == 3
    assert "zero likelihood" in capsys.readouterr().err


def test_fixed_seed_reports_are_byte_identical(synth, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _fit(synth, a, "--method", "informational") == 0
    assert _fit(synth, b, "--method", "informational") == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "model.json").read_bytes() == (b / "model.json").read_bytes()


def test_config_file_drives_fit(synth, tmp_path):
    conf = {"dataset": {"path": str(synth)}, "K": 2, "J": 3, "methods": ["standard"],
            "seeds": [4], "fit": {"max_iterations": 3}, "out": str(tmp_path / "run")}
    path = tmp_path / "conf.json"
    path.write_text(json.dumps(conf))
    assert main(["fit", "--config", str(path)]) == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["seed"] == 4 and report["iterations"] <= 3


def test_compare_single_row(synth, tmp_path, capsys):
    assert main(["compare", "--data", str(synth), "--k", "2", "--states", "3",
                 "--methods", "standard", "--seeds", "0", "--out", str(tmp_path)]) == 0
    table = json.loads((tmp_path / "table.json").read_text())
    assert len(table["rows"]) == 1
    row = table["rows"][0]
    assert {"dataset", "method", "v_measure_pct", "entropy_pct", "iterations"} <= set(row)
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and "V-measure standard" in lines[0]
    assert (tmp_path / "table.txt").read_text().strip().splitlines() == lines


def test_compare_parallel_matches_serial(synth, tmp_path):
    args = ["compare", "--data", str(synth), "--k", "2", "--states", "3", "--seeds", "0:3",
            "--max-iters", "5"]
    assert main(args + ["--out", str(tmp_path / "s")]) == 0
    assert main(args + ["--out", str(tmp_path / "p"), "--jobs", "2"]) == 0
    assert (tmp_path / "s" / "table.json").read_bytes() == (tmp_path / "p" / "table.json").read_bytes()


def test_compare_libras_row_shape(tmp_path):
    assert main(["compare", "--data", str(LIBRAS), "--libras", "1,8", "--k", "2", "--states", "2",
                 "--seeds", "0", "--max-iters", "3", "--out", str(tmp_path)]) == 0
    table = json.loads((tmp_path / "table.json").read_text())
    assert [r["method"] for r in table["rows"]] == ["standard", "informational"]
    assert table["rows"][0]["dataset"] == "libras 1 vs 8"


def _entropy_json(tmp_path, mats, capsys):
    comps = tuple(HmmParams(np.full(len(A), 1 / len(A)), A, Categorical(np.eye(len(A)))) for A in mats)
    path = tmp_path / "model.json"
    save_model(MixtureModel(comps, np.full(len(mats), 1 / len(mats))), path)
    assert main(["entropy", str(path), "--json"]) == 0
    return json.loads(capsys.readouterr().out)


def test_entropy_worked_example(tmp_path, capsys):
    n_mat = np.array([[.99, 0, .01], [.1, .8, .1], [.01, 0, .99]])
    m_mat = np.array([[.5, .2, .3], [.4, .3, .3], [.2, .4, .4]])
    rep = _entropy_json(tmp_path, [n_mat, m_mat], capsys)
    assert rep["model_average_normalized"] == pytest.approx(0.53, abs=0.05)


def test_entropy_identity_and_uniform(tmp_path, capsys):
    assert _entropy_json(tmp_path, [np.eye(3)], capsys)["model_average_normalized"] == 0.0
    uniform = _entropy_json(tmp_path, [np.full((3, 3), 1 / 3)], capsys)
    assert uniform["model_average_normalized"] == pytest.approx(1.0, abs=1e-12)


def test_entropy_text_output(tmp_path, capsys):
    comps = (HmmParams([.5, .5], np.eye(2), Categorical(np.eye(2))),)
    path = tmp_path / "m.json"
    save_model(MixtureModel(comps, [1.0]), path)
    assert main(["entropy", str(path)]) == 0
    assert "model average: 0.00%" in capsys.readouterr().out


def test_entropy_bad_model_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["entropy", str(path)]) == 2


def test_module_entry_point(synth):
    proc = subprocess.run([sys.executable, "-m", "mhmm", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "compare" in proc.stdout
