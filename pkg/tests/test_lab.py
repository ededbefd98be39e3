import csv
import io
import json
import os
from fractions import Fraction

import pytest

from permlab import lab
from permlab.lab import (
    ConfigError,
    ExperimentConfig,
    clopper_pearson,
    load_record,
    read_config_file,
    report_summary,
    run_experiment,
    save_record,
    table_csv,
)


def data_rows(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(body))


def cfg(sub, **values):
    return ExperimentConfig.build(sub, values)


# -- configuration


def test_defaults_and_parsing():
    c = cfg("grow", delta="1/25", steps="5,1,2,2", lam="3/2")
    assert c.params["delta"] == Fraction(1, 25)
    assert c.params["steps"] == (5, 1, 2, 2)
    assert c.params["lam"] == Fraction(3, 2)
    assert c.trials == 100 and c.seed == 0 and c.fmt == "csv"
    assert c.snapshot()["delta"] == "1/25"


@pytest.mark.parametrize(
    "sub, values, phrase",
    [
        ("endgame", {"n": 12, "m": 7}, "2 L m <= n"),
        ("grow", {"process": "single", "L": 3}, "L^2 < R"),
        ("grow", {"process": "growth", "n": 20, "S": 3}, "S <= n/7"),
        ("grow", {"process": "cover", "n": 14, "S": 3}, "S <= n/5"),
        ("permanent", {"n": 31}, "n <= 30"),
        ("permanent", {"n": 13, "method": "naive"}, "n <= 12"),
        ("anticonc", {"t": "1/2"}, "t >= 1"),
        ("moments", {"seed": -1}, "seed"),
        ("magnitude-sweep", {"method": "naive"}, "method"),
    ],
)
def test_constraint_violations_are_named(sub, values, phrase):
    with pytest.raises(ConfigError, match=phrase.replace("^", r"\^").replace("(", r"\(")):
        cfg(sub, **values)


def test_unknown_and_unparsable_keys():
    with pytest.raises(ConfigError, match="unknown"):
        cfg("permanent", bogus=1)
    with pytest.raises(ConfigError, match="cannot parse"):
        cfg("permanent", n="twelve")
    with pytest.raises(ConfigError):
        ExperimentConfig.build("report", {})


def test_config_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# endgame settings\nn = 10\nm=2  # pairs\n\ntrials = 3\n")
    assert read_config_file(p) == {"n": "10", "m": "2", "trials": "3"}
    p.write_text("n 10\n")
    with pytest.raises(ConfigError):
        read_config_file(p)


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv(lab.THREADS_ENV, "3")
    assert cfg("permanent").threads == 3
    assert ExperimentConfig.build("permanent", {}, threads=2).threads == 2
    monkeypatch.setenv(lab.THREADS_ENV, "x")
    with pytest.raises(ConfigError):
        cfg("permanent")


# -- running


def test_zero_trials_is_vacuous():
    rec = run_experiment(cfg("permanent", trials=0, n=6))
    assert rec.rows == [] and rec.summary["vacuous"]
    assert data_rows(rec.to_csv()) == []


def test_reruns_are_byte_identical(tmp_path):
    c = cfg("permanent", trials=20, n=9, seed=77)
    a, b = run_experiment(c), run_experiment(c)
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()
    threaded = ExperimentConfig.build("permanent", {"trials": 20, "n": 9, "seed": 77}, threads=4)
    assert run_experiment(threaded).to_csv() == a.to_csv()
    assert "timestamp" in a.metadata and "timestamp" not in a.to_csv()


def test_csv_layout_and_exact_values():
    rec = run_experiment(cfg("moments", n=4, trials=0))
    text = rec.to_csv()
    lines = text.splitlines()
    assert lines[0] == "# permlab-schema v1"
    assert lines[1] == "# subcommand: moments"
    assert json.loads(lines[2][len("# config: "):])["eps"] == "1/10"
    rows = data_rows(text)
    assert [r["second_moment"] for r in rows] == ["1", "2", "8", "44"]
    assert all(r["violation"] == "" for r in rows)


def test_rationals_written_as_fractions():
    rec = run_experiment(cfg("anticonc", trials=5, n=6, t=2))
    rows = data_rows(rec.to_csv())
    for r in rows:
        if r["exact_prob"]:
            Fraction(r["exact_prob"])  # p/q or integer
            assert "." not in r["exact_prob"]
            assert r["holds"] == "true"


def test_endgame_record_with_exact_ci():
    rec = run_experiment(cfg("endgame", trials=500, n=12, L=1, m=4))
    assert len(rec.rows) == 500 and rec.ok
    s = rec.summary
    lo, hi = clopper_pearson(s["successes"], 500)
    assert (s["ci_low"], s["ci_high"]) == (lo, hi)
    assert lo <= s["successes"] / 500 <= hi
    assert s["success_rate"] == Fraction(s["successes"], 500)


def test_clopper_pearson_known_values():
    lo, hi = clopper_pearson(0, 10)
    assert lo == 0 and hi == pytest.approx(1 - 0.025 ** (1 / 10))
    lo, hi = clopper_pearson(10, 10)
    assert hi == 1 and lo == pytest.approx(0.025 ** (1 / 10))


def test_theorem_violations_are_recorded(monkeypatch):
    def boom(c, t):
        if t == 1:
            raise lab.TheoremViolation("synthetic")
        return lab.TrialOutput({"trial": t, "n": 1, "per": 1, "log_abs_per": 0.0})

    monkeypatch.setattr(lab, "_trial_permanent", boom)
    rec = run_experiment(cfg("permanent", trials=3))
    assert not rec.ok and rec.summary["violations"] == 1
    rows = data_rows(rec.to_csv())
    assert rows[1]["violation"].endswith("synthetic") and rows[0]["violation"] == ""


def test_grow_processes_run():
    for process, extra in [("weak", {"n": 12, "R": 4}), ("cover", {"n": 15, "S": 3}),
                           ("growth", {"n": 21, "S": 3, "T": 2}), ("single", {})]:
        rec = run_experiment(cfg("grow", trials=3, process=process, **extra))
        assert rec.ok and len(rec.rows) == 3


# -- persistence and reports


def test_atomic_outputs(tmp_path):
    out = tmp_path / "sub" / "perm.csv"
    rec = run_experiment(ExperimentConfig.build("permanent", {"trials": 4, "n": 5}, out=str(out)))
    assert out.exists() and (tmp_path / "sub" / "perm.csv.meta.json").exists()
    assert out.read_text() == rec.to_csv()
    assert not [p for p in out.parent.iterdir() if p.name.endswith(".tmp")]
    meta = json.loads((tmp_path / "sub" / "perm.csv.meta.json").read_text())
    assert meta["seed_audit"]["jobs"][2] == {"trial": 2, "stream": 2}


def test_atomic_write_leaves_old_file_on_failure(tmp_path, monkeypatch):
    p = tmp_path / "x.csv"
    lab.atomic_write(p, "old\n")

    def fail(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(lab.os, "replace", fail)
    with pytest.raises(OSError):
        lab.atomic_write(p, "new\n")
    assert p.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["x.csv"]


def test_json_round_trip(tmp_path):
    rec = run_experiment(cfg("endgame", trials=4))
    save_record(rec, tmp_path / "e.json", "json")
    loaded = load_record(tmp_path / "e.json")
    assert loaded.subcommand == "endgame" and len(loaded.rows) == 4
    assert (tmp_path / "e.json.diag.json").exists()


def test_single_record_passthrough(tmp_path):
    rec = run_experiment(cfg("grow", trials=6))
    save_record(rec, tmp_path / "g.csv")
    cols, rows = report_summary([load_record(tmp_path / "g.csv")])
    (row,) = rows
    assert row["trials"] == 6 and row["successes"] == rec.summary["successes"]


def test_pooled_rate_over_ten_records(tmp_path):
    recs = []
    total = wins = 0
    for s in range(10):
        rec = run_experiment(cfg("endgame", trials=3, seed=s, n=8, m=2))
        save_record(rec, tmp_path / f"e{s}.csv")
        recs.append(load_record(tmp_path / f"e{s}.csv"))
        total += rec.summary["trials"]
        wins += rec.summary["successes"]
    _, (row,) = report_summary(recs)
    assert row["success_rate"] == Fraction(wins, total) and row["records"] == 10


def test_magnitude_report_has_normalized_column(tmp_path):
    rec = run_experiment(cfg("magnitude-sweep", trials=5, ns="8,10,12"))
    save_record(rec, tmp_path / "m.csv")
    cols, rows = report_summary([load_record(tmp_path / "m.csv")])
    assert "normalized_log_per" in cols and [r["n"] for r in rows] == [8, 10, 12]
    svg = lab.magnitude_svg(rows)
    assert svg.startswith("<svg") and "polyline" in svg and "median log|per|" in svg
    text = table_csv(cols, rows)
    assert list(csv.reader(io.StringIO(text.splitlines()[2])))[0] == cols


def test_mixed_subcommands_rejected(tmp_path):
    a = run_experiment(cfg("permanent", trials=2))
    b = run_experiment(cfg("endgame", trials=2))
    save_record(a, tmp_path / "a.csv")
    save_record(b, tmp_path / "b.csv")
    with pytest.raises(ConfigError, match="different subcommands"):
        report_summary([load_record(tmp_path / "a.csv"), load_record(tmp_path / "b.csv")])
