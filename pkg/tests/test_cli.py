import csv
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hbem.cli import format_value, main
from hbem.config import ExperimentConfig, ExperimentError, parse_int_list
from hbem.experiments import run_cholesky_experiment, run_inverse_experiment


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_int_list():
    assert parse_int_list("2..5") == [2, 3, 4, 5]
    assert parse_int_list("5,10, 20") == [5, 10, 20]
    assert parse_int_list("1,3..4") == [1, 3, 4]
    with pytest.raises(ValueError):
        parse_int_list("5..2")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_roundtrip(x):
    assert float(format_value(x)) == x


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(eta=0)
    with pytest.raises(ValueError):
        ExperimentConfig(ranks=[])
    with pytest.raises(ValueError):
        ExperimentConfig(ranks=[3, 2])
    with pytest.raises(ValueError):
        ExperimentConfig(geometry="torus")
    cfg = ExperimentConfig()
    assert cfg.eta == 2.0 and cfg.n_leaf == 25 and cfg.seed == 12345 and cfg.max_dense_n == 4096


def test_cluster_row(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["cluster", "--geometry", "lshape", "--refinement", "64", "--n-leaf", "25",
                 "--eta", "2", "--out", str(out)]) == 0
    rows = read(out)
    assert len(rows) == 1 and list(rows[0]) == ["N", "n_leaf", "eta", "depth", "C_sp", "n_far", "n_near"]
    assert rows[0]["N"] == "512"


def test_kernel_decay(tmp_path):
    out = tmp_path / "k.csv"
    assert main(["kernel-decay", "--dim", "2", "--k", "1..8", "--out", str(out)]) == 0
    rows = read(out)
    assert len(rows) == 8
    errs = [float(r["max_error"]) for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert [int(r["r"]) for r in rows] == [(k + 1) ** 2 for k in range(1, 9)]


def test_mesh_and_assemble(tmp_path):
    out, mfile, dump = tmp_path / "m.csv", tmp_path / "mesh.txt", tmp_path / "v.bin"
    assert main(["mesh", "--geometry", "cube", "--refinement", "2", "--save", str(mfile), "--out", str(out)]) == 0
    assert read(out)[0]["N"] == "48"
    assert main(["assemble", "--geometry", "file", "--mesh", str(mfile), "--dump", str(dump),
                 "--no-timing", "--out", str(out)]) == 0
    row = read(out)[0]
    assert row["spd"] == "1" and float(row["max_asymmetry"]) == 0.0
    assert dump.read_bytes().startswith(b"48 48\n")


def test_bit_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["inverse", "--refinement", "16", "--ranks", "1..4", "--no-timing"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_threads_same_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["cholesky", "--refinement", "32", "--ranks", "1..3"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--threads", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_precondition_failures_write_nothing(tmp_path, capsys):
    out = tmp_path / "x.csv"
    assert main(["cholesky", "--refinement", "8", "--scale", "2", "--out", str(out)]) != 0
    assert "scale" in capsys.readouterr().err
    assert not out.exists()
    assert main(["inverse", "--refinement", "64", "--max-dense-n", "100", "--out", str(out)]) != 0
    assert not out.exists()
    assert main(["3d", "--refinement", "11", "--out", str(out)]) != 0
    assert main(["inverse", "--ranks", "5,3", "--out", str(out)]) != 0
    assert main(["mesh", "--geometry", "file", "--mesh", str(tmp_path / "missing"), "--out", str(out)]) != 0
    assert not out.exists()


def test_unknown_flag_exit_code():
    proc = subprocess.run([sys.executable, "-m", "hbem.cli", "cluster", "--bogus"], capture_output=True)
    assert proc.returncode == 2
    with pytest.raises(SystemExit) as info:
        main(["cluster", "--bogus"])
    assert info.value.code == 2


def test_inverse_full_rank():
    cfg = ExperimentConfig(refinement=16, ranks=[128])
    assert run_inverse_experiment(cfg).rows[0]["err_spectral"] <= 1e-7


def test_inverse_storage_only_large():
    cfg = ExperimentConfig(refinement=2048, ranks=[2], storage_only=True)
    row = run_inverse_experiment(cfg).rows[0]
    assert row["N"] == 16384 and 0.6 <= row["compression_pct"] <= 2.4
    with pytest.raises(ExperimentError):
        run_inverse_experiment(ExperimentConfig(refinement=2048, ranks=[2]))


def test_cholesky_full_rank_and_ratio():
    res = run_cholesky_experiment(ExperimentConfig(refinement=64, ranks=[2, 4, 6, 512]))
    assert res.rows[-1]["rel_factor_err"] <= 1e-9
    for row in res.rows[:-1]:
        assert 0 < row["rel_product_err"] <= 2.0001 * row["rel_factor_err"]


@pytest.mark.slow
def test_3d_experiment(tmp_path):
    out = tmp_path / "3d.csv"
    assert main(["3d", "--refinement", "8", "--ranks", "5,10,20,30", "--out", str(out)]) == 0
    errs = np.array([float(r["err_spectral"]) for r in read(out)])
    assert np.all(np.diff(errs) < 0)
    r = np.array([5, 10, 20, 30])
    assert np.polyfit(np.sqrt(r), np.log(errs), 1)[0] < 0
