import subprocess
import sys

from permlab import lab
from permlab.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main


def data_lines(text):
    return [ln for ln in text.splitlines() if not ln.startswith("#")]


def test_permanent_to_stdout(capsys):
    assert main(["permanent", "--n", "6", "--trials", "3"]) == EXIT_OK
    out = capsys.readouterr()
    lines = data_lines(out.out)
    assert lines[0] == "trial,n,per,log_abs_per,violation" and len(lines) == 4
    assert "summary" in out.err


def test_same_flags_same_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["magnitude-sweep", "--ns", "6,9", "--trials", "4", "--seed", "12", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_flag_override(tmp_path, capsys):
    conf = tmp_path / "e.cfg"
    conf.write_text("n = 8\nm = 2\ntrials = 2\n")
    assert main(["endgame", "--config", str(conf), "--trials", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert '"trials": "3"' in out and '"n": "8"' in out
    assert len(data_lines(out)) == 4


def test_usage_errors_exit_two(tmp_path, capsys):
    assert main(["endgame", "--n", "12", "--m", "7"]) == EXIT_USAGE
    assert "2 L m <= n" in capsys.readouterr().err
    assert main(["endgame", "--config", str(tmp_path / "missing.cfg")]) == EXIT_USAGE


def test_theorem_violation_exits_one(monkeypatch, capsys):
    def boom(c, t):
        raise lab.TheoremViolation("synthetic")

    monkeypatch.setattr(lab, "_trial_permanent", boom)
    assert main(["permanent", "--trials", "2"]) == EXIT_VIOLATION
    assert "VIOLATION" in capsys.readouterr().err


def test_bound_shortfall_only_warns(capsys):
    # n = 1 has no normalized log, so the median falls outside [0.5, 1.1]
    assert main(["magnitude-sweep", "--ns", "1", "--trials", "3"]) == EXIT_OK
    err = capsys.readouterr()
    assert "warning" in err.err and "# warning:" in err.out


def test_report_and_svg(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["magnitude-sweep", "--ns", "6,8", "--trials", "3", "--out", str(a)])
    main(["magnitude-sweep", "--ns", "6,8", "--trials", "3", "--seed", "1", "--out", str(b), "--format", "json"])
    svg = tmp_path / "m.svg"
    assert main(["report", str(a), str(b), "--svg", str(svg)]) == EXIT_OK
    out = capsys.readouterr().out
    lines = data_lines(out)
    assert lines[0].startswith("n,samples") and lines[1].startswith("6,6,")
    assert svg.read_text().startswith("<svg")


def test_report_mixed_subcommands(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["permanent", "--trials", "2", "--out", str(a)])
    main(["endgame", "--trials", "2", "--out", str(b)])
    assert main(["report", str(a), str(b)]) == EXIT_USAGE


def test_threads_env_keeps_output(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["permanent", "--n", "8", "--trials", "6", "--out", str(a)])
    monkeypatch.setenv("PERMLAB_THREADS", "3")
    main(["permanent", "--n", "8", "--trials", "6", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "permlab.cli", "moments", "--n", "3", "--trials", "0"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert data_lines(r.stdout)[1].startswith("1,1,")
