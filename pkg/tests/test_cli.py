import json

import numpy as np
import pytest

from ibpdn.cli import build_parser, main
from ibpdn.experiments import CSV_FIELDS, ExperimentConfig, format_csv, run
from ibpdn.sensing import write_matrix_csv
from ibpdn.signals import write_vector

SMALL = ["--n", "24", "--m", "14", "--k_true", "3", "--s_known", "2", "--trials", "3"]


def _run(args, tmp_path, name="out"):
    out = tmp_path / name
    assert main(args + ["--out", str(out)]) == 0
    return out.read_text()


def test_constants_json(tmp_path):
    d = json.loads(_run(["constants", "--delta_2k", "0.02", "--delta_s2k", "0.2"], tmp_path))
    assert d["C"] == pytest.approx(7.31513, abs=1e-5)
    assert d["D"] == pytest.approx(3.34221, abs=1e-5)
    assert d["condition_ok"] is True


def test_rip_json(tmp_path):
    d = json.loads(_run(["rip", "--n", "6", "--m", "6", "--ensemble", "identity", "--q", "3"], tmp_path))
    assert d["radius"] == pytest.approx(0.0, abs=1e-14)
    assert d["is_lower_bound"] is False


def test_solve_json(tmp_path):
    d = json.loads(_run(["solve", *SMALL, "--epsilon", "0.01"], tmp_path))
    assert d["result"]["converged"]
    assert d["certificate_passed"]


def test_solve_from_files(tmp_path):
    write_matrix_csv(tmp_path / "phi.csv", np.eye(4))
    write_vector(tmp_path / "y.txt", [5.0, 0.0, 3.0, 0.0])
    d = json.loads(_run(["solve", "--phi_path", str(tmp_path / "phi.csv"), "--y_path",
                         str(tmp_path / "y.txt"), "--t_indices", "0"], tmp_path))
    np.testing.assert_allclose(d["result"]["x_star"], [5, 0, 3, 0], atol=1e-12)
    assert d["result"]["objective"] == pytest.approx(3.0)


def test_exact_recovery_identity(tmp_path):
    text = _run(["exact_recovery", "--n", "12", "--m", "12", "--ensemble", "identity",
                 "--k_true", "4", "--s_known", "2", "--trials", "4"], tmp_path)
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_FIELDS["exact_recovery"])
    assert len(lines) == 5
    assert all(float(line.split(",")[2]) < 1e-10 for line in lines[1:])


def test_phase_zero_sparsity(tmp_path):
    text = _run(["phase", "--n", "20", "--m_values", "4,8,12", "--k_values", "0", "--k_true", "0",
                 "--s_known", "0", "--trials", "3"], tmp_path)
    rates = [float(line.split(",")[2]) for line in text.splitlines()[1:]]
    assert rates == [1.0, 1.0, 1.0]


@pytest.mark.parametrize("experiment,extra", [
    ("exact_recovery", []),
    ("noise_sweep", ["--epsilons", "0,0.05"]),
    ("phase", ["--m_values", "8,14", "--k_values", "1,3"]),
    ("ctr_compare", ["--epsilon", "0.02"]),
    ("sequence", ["--frames", "3"]),
])
def test_byte_identical_reruns(tmp_path, experiment, extra):
    args = [experiment, *SMALL, *extra, "--seed", "17"]
    assert _run(args, tmp_path, "a") == _run(args, tmp_path, "b")


def test_workers_do_not_change_output(tmp_path):
    args = ["exact_recovery", *SMALL, "--seed", "3"]
    assert _run(args, tmp_path, "a") == _run(args + ["--workers", "3"], tmp_path, "b")


def test_seed_changes_output(tmp_path):
    args = ["exact_recovery", *SMALL]
    assert _run(args + ["--seed", "1"], tmp_path, "a") != _run(args + ["--seed", "2"], tmp_path, "b")


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta_2k": 0.2, "delta_s2k": 0.2}))
    d = json.loads(_run(["constants", "--config", str(cfg)], tmp_path))
    assert d["D"] == pytest.approx(4.187672642712108, rel=1e-12)
    d = json.loads(_run(["constants", "--config", str(cfg), "--delta_2k", "0.02"], tmp_path))
    assert d["D"] == pytest.approx(3.3422148761703418, rel=1e-12)


@pytest.mark.parametrize("args", [
    ["exact_recovery", "--trials", "0"],
    ["exact_recovery", "--rho_good", "1.5"],
    ["exact_recovery", "--alpha", "2.5"],
    ["exact_recovery", "--n", "4", "--s_known", "9"],
])
def test_invalid_config_exits_nonzero(args, capsys):
    assert main(args) != 0
    assert "invalid configuration" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["constants", "--config", str(cfg)]) == 2


def test_help_documents_csv_fields():
    text = build_parser().format_help()
    for cols in CSV_FIELDS.values():
        assert ", ".join(cols) in text


def test_failed_trial_recorded_and_run_continues():
    # a known support as large as m leaves nothing to cancel into; each trial records the error
    cfg = ExperimentConfig(experiment="ctr_compare", n=10, m=10, k_true=3, s_known=10, rho_good=1.0,
                           trials=2, ensemble="identity")
    header, rows = run(cfg)
    assert len(rows) == 2
    assert all(row[-1] != "ok" for row in rows)


def test_csv_formatting_precision():
    text = format_csv(["a", "b", "c"], [[1 / 3, True, None]])
    assert text.splitlines()[1] == "0.33333333333333331,true,"
