import subprocess
import sys

import numpy as np
import pytest

from tidetector.cli import main, parse_args
from tidetector.detectors import DetectorParams
from tidetector.paramfile import ParamFile, format_params, parse_params, read_params, write_params
from tidetector.training import TrainConfig

TRAIN_ARGV = ["train", "--n", "200", "--m", "128", "--snr-db", "20", "--layers", "50", "--batch", "1250",
              "--rounds-batches", "2000", "--lr", "0.025", "--seed", "7", "--out", "p.tsv"]


def test_parse_train_reference_hyperparameters():
    inv = parse_args(TRAIN_ARGV)
    assert inv.command == "train"
    assert inv.config == TrainConfig(n=200, m=128, snr_db=20.0, T=50, D=1250, K=2000, lr=0.025, seed=7)


@pytest.mark.parametrize("flag,value", [("--m", "0"), ("--lr", "-1"), ("--batch", "2.5"), ("--snr-db", "nan")])
def test_parse_rejects_bad_numbers(capsys, flag, value):
    argv = list(TRAIN_ARGV)
    argv[argv.index(flag) + 1] = value
    with pytest.raises(SystemExit) as exc:
        parse_args(argv)
    assert exc.value.code != 0
    assert flag in capsys.readouterr().err


def test_parse_missing_out(capsys):
    with pytest.raises(SystemExit) as exc:
        parse_args(TRAIN_ARGV[:-2])
    assert exc.value.code != 0
    assert "--out" in capsys.readouterr().err


def test_parse_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        parse_args(TRAIN_ARGV + ["--momentum", "0.9"])
    assert exc.value.code != 0
    assert "--momentum" in capsys.readouterr().err


def test_parse_eval_needs_dimensions(capsys):
    with pytest.raises(SystemExit):
        parse_args(["eval", "--snr-db", "10", "--detector", "mmse", "--out", "x.csv"])
    assert "--n" in capsys.readouterr().err


def test_parse_eval_ti_needs_params(capsys):
    with pytest.raises(SystemExit):
        parse_args(["eval", "--n", "4", "--m", "3", "--snr-db", "10", "--detector", "ti", "--out", "x.csv"])
    assert "--params" in capsys.readouterr().err


def sample_paramfile(T=3):
    p = DetectorParams(np.array([1.0 / 3, 2.5, np.pi])[:T], np.array([-0.1, 1e-6, 7.0])[:T])
    return ParamFile(p, n=4, m=3, snr_db=12.5, seed=9)


def test_paramfile_round_trip(tmp_path):
    pf = sample_paramfile()
    a = tmp_path / "a.tsv"
    b = tmp_path / "b.tsv"
    write_params(pf, a)
    back = read_params(a)
    write_params(back, b)
    assert a.read_bytes() == b.read_bytes()
    np.testing.assert_array_equal(back.params.gamma, pf.params.gamma)
    np.testing.assert_array_equal(back.params.theta, pf.params.theta)
    assert (back.n, back.m, back.T, back.snr_db, back.seed) == (4, 3, 3, 12.5, 9)


def test_paramfile_layout():
    lines = format_params(sample_paramfile()).splitlines()
    assert lines[0] == "# tidetector-params"
    assert lines[7] == "t\tgamma\ttheta"
    assert lines[8] == "1\t0.33333333333333331\t-0.10000000000000001"
    assert len(lines) == 11


@pytest.mark.parametrize("mutate", [
    lambda s: s.replace("# T\t3", "# T\t4"),
    lambda s: s.replace("\n2\t", "\n5\t"),
    lambda s: s.replace("# tidetector-params", "# something"),
    lambda s: s.replace("# format-version\t1", "# format-version\t2"),
])
def test_paramfile_rejects_malformed(mutate):
    with pytest.raises(ValueError):
        parse_params(mutate(format_params(sample_paramfile())))


def test_train_k0_writes_ones(tmp_path, capsys):
    out = tmp_path / "p.tsv"
    rc = main(["train", "--n", "3", "--m", "2", "--snr-db", "10", "--layers", "4", "--batch", "5",
               "--rounds-batches", "0", "--lr", "0.025", "--out", str(out)])
    assert rc == 0
    pf = read_params(out)
    np.testing.assert_array_equal(pf.params.as_vector(), 1.0)
    stdout = capsys.readouterr().out.splitlines()
    assert stdout[0] == "round 1 loss nan"
    assert len(stdout) == 4


def test_train_log_file(tmp_path, capsys):
    out, log = tmp_path / "p.tsv", tmp_path / "loss.log"
    rc = main(["train", "--n", "3", "--m", "2", "--snr-db", "10", "--layers", "2", "--batch", "5",
               "--rounds-batches", "3", "--lr", "0.025", "--out", str(out), "--log", str(log)])
    assert rc == 0
    lines = log.read_text().splitlines()
    assert [ln.split()[:3] for ln in lines] == [["round", "1", "loss"], ["round", "2", "loss"]]
    assert log.read_text().splitlines() == capsys.readouterr().out.splitlines()


def test_eval_oracle(tmp_path):
    out = tmp_path / "ber.csv"
    rc = main(["eval", "--n", "4", "--m", "3", "--snr-db", "10", "--detector", "oracle",
               "--max-bits", "1000", "--trials-per-channel", "10", "--out", str(out)])
    assert rc == 0
    header, row = out.read_text().splitlines()
    assert header == "snr_db,detector,bits,errors,ber,ci95"
    assert row.split(",")[:5] == ["10", "oracle", "1040", "0", "0"]


def test_eval_ti_takes_dimensions_from_params(tmp_path):
    pf = tmp_path / "p.tsv"
    write_params(ParamFile(DetectorParams.ones(3), n=4, m=3, snr_db=10.0, seed=0), pf)
    out = tmp_path / "ber.csv"
    assert main(["eval", "--snr-db", "10", "--detector", "ti", "--params", str(pf),
                 "--trials-per-channel", "20", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1].startswith("10,ti,")


def test_eval_dimension_conflict(tmp_path, capsys):
    pf = tmp_path / "p.tsv"
    write_params(ParamFile(DetectorParams.ones(3), n=4, m=3, snr_db=10.0, seed=0), pf)
    with pytest.raises(SystemExit):
        parse_args(["eval", "--n", "5", "--snr-db", "10", "--detector", "ti", "--params", str(pf), "--out", "x"])
    assert "--params" in capsys.readouterr().err


def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = main(["sweep", "--n", "4", "--m", "3", "--snr-db", "10", "0", "--detector", "mmse", "ista",
               "--trials-per-channel", "20", "--min-errors", "20", "--out", str(out)])
    assert rc == 0
    rows = [ln.split(",")[:2] for ln in out.read_text().splitlines()[1:]]
    assert rows == [["0", "ista"], ["0", "mmse"], ["10", "ista"], ["10", "mmse"]]


def test_export_trace_rows(tmp_path):
    pf = tmp_path / "p.tsv"
    write_params(ParamFile(DetectorParams(np.ones(5), -np.ones(5) * 0.5), n=4, m=3, snr_db=15.0, seed=0), pf)
    out = tmp_path / "trace.tsv"
    assert main(["export-trace", "--params", str(pf), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t\tgamma\tabs_theta\terror"
    body = np.array([[float(c) for c in ln.split("\t")] for ln in lines[1:]])
    assert body.shape == (5, 4)
    np.testing.assert_array_equal(body[:, 0], np.arange(1, 6))
    np.testing.assert_array_equal(body[:, 2], 0.5)
    assert np.all(np.isfinite(body)) and np.all(body[:, 3] >= 0)


def test_run_error_exit_status(tmp_path, capsys):
    pf = tmp_path / "p.tsv"
    pf.write_text("garbage\n")
    rc = main(["export-trace", "--params", str(pf), "--out", str(tmp_path / "t.tsv")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = tmp_path / "p.tsv"
    proc = subprocess.run([sys.executable, "-m", "tidetector", "train", "--n", "2", "--m", "1", "--snr-db", "5",
                           "--layers", "1", "--batch", "2", "--rounds-batches", "1", "--lr", "0.01",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
    bad = subprocess.run([sys.executable, "-m", "tidetector", "train", "--m", "0"], capture_output=True, text=True)
    assert bad.returncode == 2
