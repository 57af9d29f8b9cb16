import csv
import subprocess
import sys

import pytest

from oskm.cli import main

SMALL = ["--seeds", "2", "--n-samples", "60", "--dim", "8"]


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return header, rows


def test_run_writes_trace_and_header(tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert main(["run", *SMALL, "--label-noise", "0.2", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header[0].startswith("# oskm ")
    assert header[1].startswith("# argv: oskm run ")
    assert "# label_noise = 0.2" in header
    assert len(rows) == 2 * 2 * 60
    assert {r["algo"] for r in rows} == {"oskm", "norma"}
    r = rows[0]
    assert r["mistake_vs_clean"] == str(int(r["predicted_label"] != r["y_clean"]))
    assert "accuracy_vs_clean" in capsys.readouterr().out


def test_header_argv_reproduces_output(tmp_path):
    first = tmp_path / "a.csv"
    assert main(["run", *SMALL, "--algo", "oskm", "--snr-db", "5", "--out", str(first)]) == 0
    argv = first.read_text().splitlines()[1].removeprefix("# argv: oskm ").split()
    second = tmp_path / "b.csv"
    assert main(argv + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_run_to_stdout_keeps_summary_off_stdout(capsys):
    assert main(["run", *SMALL, "--algo", "norma"]) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("# oskm ")
    assert "accuracy_vs_clean" in captured.err


def test_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--axis", "snr", "--snr-db", "0,inf", *SMALL, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert [(r["axis_value"], r["algo"]) for r in rows] == [
        ("0.0", "oskm"), ("0.0", "norma"), ("inf", "oskm"), ("inf", "norma")]
    assert all(r["n_seeds"] == "2" for r in rows)


def test_reduce_check(capsys):
    assert main(["reduce-check", "--seeds", "2", "--n-samples", "100"]) == 0
    assert "max |score difference|" in capsys.readouterr().out


def test_bound_check(tmp_path, capsys):
    out = tmp_path / "bound.csv"
    assert main(["bound-check", "--seeds", "3", "--n-samples", "100", "--class-sep", "12",
                 "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 3 and all(r["holds"] == "1" for r in rows)
    assert "holds" in capsys.readouterr().out


@pytest.mark.parametrize("argv, message", [
    (["run", "--tau-p", "0"], "tau_p"),
    (["run", "--tau-e", "500"], "tau_p <= tau_e <= tau"),
    (["run", "--label-noise", "0.7"], "label_flip_prob"),
    (["run", "--seeds", "0"], "--seeds"),
    (["reduce-check", "--rho", "0.1"], "reduce-check requires --rho"),
    (["sweep", "--axis", "label-noise", "--label-noise", "0.1,0.9"], "--label-noise values"),
    (["sweep", "--axis", "snr", "--seeds", "1"], "--seeds >= 2"),
    (["bound-check", "--kernel", "gaussian"], "--kernel linear"),
    (["bound-check", "--n-samples", "0"], "nonempty stream"),
    (["run", "--snr-db", "1,2"], "single value"),
])
def test_usage_errors_exit_2(argv, message, capsys):
    assert main(argv) == 2
    assert message in capsys.readouterr().err


def test_unparseable_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--eta", "fast"])
    assert exc.value.code == 2


def test_divergence_exit_code(capsys):
    assert main(["run", "--seeds", "1", "--n-samples", "300", "--algo", "oskm",
                 "--rho", "10000", "--eta", "0.99", "--out", "-"]) == 3
    assert "aborted" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "oskm", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("oskm ")
