import json

import numpy as np
import pytest

from spmvtune.cli import EXIT_DATA, EXIT_OK, main

from helpers import leaf, model_dict, poisson2d
from test_bench import write_mtx
from helpers import coo_from_dense

IDENTITY_MTX = """%%MatrixMarket matrix coordinate real general
3 3 3
1 1 1.0
2 2 1.0
3 3 1.0
"""

STUB_CLASSES = {
    "FORMAT": (["COO", "CSR", "ELL", "DIA", "HYB"], "DIA"),
    "COO-LIB": (["LibA", "LibB"], "LibA"),
    "CSR-LIB": (["LibA", "LibB", "LibC"], "LibA"),
    "ELL-LIB": (["LibA", "LibC"], "LibA"),
    "CSR-TPV": (["2", "4", "8", "16", "32"], "32"),
}


@pytest.fixture
def models_dir(tmp_path):
    d = tmp_path / "models"
    d.mkdir()
    for name, (classes, forced) in STUB_CLASSES.items():
        trees = [[leaf(1.0 if c == forced else 0.0)] for c in classes]
        (d / f"{name}.json").write_text(json.dumps(model_dict(classes, trees)))
    return d


@pytest.fixture
def identity_mtx(tmp_path):
    path = tmp_path / "identity.mtx"
    path.write_text(IDENTITY_MTX)
    return path


@pytest.fixture
def poisson_mtx(tmp_path):
    path = tmp_path / "poisson100.mtx"
    write_mtx(path, poisson2d(10))
    return path


def test_predict_prints_decisions(identity_mtx, models_dir, capsys):
    code = main(["predict", str(identity_mtx), "--models", str(models_dir)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "Format: DIA/LibA (terminal)" in out
    assert "final: DIA/LibA" in out


def test_solve_async_writes_report(poisson_mtx, models_dir, tmp_path, capsys):
    out_dir = tmp_path / "reports"
    code = main(["solve", str(poisson_mtx), "--mode", "async",
                 "--models", str(models_dir), "--out", str(out_dir),
                 "--tol", "1e-8"])
    assert code == EXIT_OK
    report_path = out_dir / "poisson100_async_report.json"
    doc = json.loads(report_path.read_text())
    assert doc["converged"] is True
    assert doc["mode"] == "async"
    assert doc["config_timeline"][0]["config"] == "COO/LibA"
    out = capsys.readouterr().out
    assert "converged" in out


def test_solve_default_mode_needs_no_models(poisson_mtx, capsys):
    assert main(["solve", str(poisson_mtx)]) == EXIT_OK
    assert "converged" in capsys.readouterr().out


def test_solve_seq_without_models_is_data_error(poisson_mtx, capsys):
    assert main(["solve", str(poisson_mtx), "--mode", "seq"]) == EXIT_DATA
    assert "--models" in capsys.readouterr().err


def test_dataset_empty_dir_exits_3(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main(["dataset", str(empty), "--out", str(tmp_path / "out")])
    assert code == EXIT_DATA
    assert "no .mtx" in capsys.readouterr().err


def test_missing_matrix_exits_3(capsys):
    assert main(["solve", "/nonexistent/m.mtx"]) == EXIT_DATA


def test_empty_matrix_rejected(tmp_path, capsys):
    path = tmp_path / "empty.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 0\n")
    assert main(["solve", str(path)]) == EXIT_DATA
    assert "no entries" in capsys.readouterr().err


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])  # missing matrix argument
    assert exc.value.code == 2


def test_bench_lists_all_configs(identity_mtx, tmp_path, capsys):
    out = tmp_path / "timing.json"
    code = main(["bench", str(identity_mtx), "--runs", "2", "--warmups", "1",
                 "--out", str(out)])
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["times"]) == 13
    printed = capsys.readouterr().out
    assert "COO/LibA" in printed and "CSR/LibA/32" in printed


def test_compare_and_report_round_trip(models_dir, tmp_path, capsys):
    mtx = tmp_path / "grid.mtx"
    write_mtx(mtx, poisson2d(6))
    out_dir = tmp_path / "reports"
    code = main(["compare", str(mtx), "--models", str(models_dir),
                 "--out", str(out_dir), "--tol", "1e-8"])
    assert code == EXIT_OK
    capsys.readouterr()

    summary = tmp_path / "summary.csv"
    code = main(["report", str(out_dir), "--out", str(summary)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "grid" in out
    assert "speedup_async" in summary.read_text().splitlines()[0]


def test_report_empty_dir_exits_3(tmp_path, capsys):
    empty = tmp_path / "none"
    empty.mkdir()
    assert main(["report", str(empty)]) == EXIT_DATA


def test_dataset_command_end_to_end(tmp_path, capsys):
    d = tmp_path / "mats"
    d.mkdir()
    write_mtx(d / "eye.mtx", coo_from_dense(np.eye(6)))
    write_mtx(d / "grid.mtx", poisson2d(4))
    out = tmp_path / "out"
    code = main(["dataset", str(d), "--out", str(out),
                 "--runs", "2", "--warmups", "1"])
    assert code == EXIT_OK
    assert (out / "FORMAT.csv").exists()
    printed = capsys.readouterr().out
    assert "FORMAT: 2 rows" in printed
