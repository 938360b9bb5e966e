import csv
import json
import math

import pytest

from fracmosco import cli, experiments
from fracmosco.bernstein import BernsteinSymbol

BAD_ALPHA = """
kind = "converge"
[generator]
alpha = 1.5
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) >= 8
    assert cli.main(["list", "--json"]) == 0
    items = json.loads(capsys.readouterr().out)
    assert isinstance(items, list) and len(items) >= 8
    assert {"name", "description", "expected_runtime", "kind"} <= set(items[0])


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1
    assert cli.main(["run", "--suite", "nope"]) == 1
    assert cli.main(["dump-suite", "nope"]) == 1
    assert cli.main(["run", "/does/not/exist.toml"]) == 1


def test_invalid_config_names_key(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text(BAD_ALPHA)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "generator.alpha" in err and "alpha must lie in (0, 1)" in err
    assert not (tmp_path / "o").exists()
    assert cli.main(["validate", str(p)]) == 1


def test_help_documents_columns(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for kind, cols in experiments.COLUMNS.items():
        assert kind in out and ", ".join(cols) in out
    assert experiments.OUTPUT_ENV in out


def test_symbol_table(tmp_path):
    assert cli.main(["run", "--suite", "symbols", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "results.csv")
    assert len(rows) == 12
    syms = {str(s): s for s in (BernsteinSymbol.stable(0.5), BernsteinSymbol.gamma(1.0, 1.0),
                                BernsteinSymbol.inverse_gaussian(1.0, 1.0))}
    for r in rows:
        assert float(r["value"]) == float(syms[r["symbol"]](float(r["lam"])))
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["seed"] == 0 and meta["kind"] == "symbol-table" and len(meta["config_hash"]) == 64
    assert {"numpy", "scipy", "python", "fracmosco"} <= set(meta["versions"])


def test_byte_identical_rerun(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["run", "--suite", "weights", "--out", str(d)]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


def test_dump_then_run_matches_suite(tmp_path, capsys):
    assert cli.main(["dump-suite", "converge-robin"]) == 0
    p = tmp_path / "c.toml"
    p.write_text(capsys.readouterr().out)
    assert cli.main(["validate", str(p)]) == 0
    assert experiments.suite_config("converge-robin").hash() in capsys.readouterr().out
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 0
    meta = json.loads((tmp_path / "o" / "metadata.json").read_text())
    assert meta["details"]["iff_agreement"] is True
    assert all(v["verdict"] for v in meta["details"]["verdicts"].values())
    rows = _rows(tmp_path / "o" / "results.csv")
    errs = [float(r["value"]) for r in rows if r["metric"] == "resolvent_err"]
    assert errs == sorted(errs, reverse=True)
    assert (tmp_path / "o" / "convergence_tc_semigroup_err.dat").exists()


def test_output_root_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv(experiments.OUTPUT_ENV, str(tmp_path))
    assert cli.main(["run", "--suite", "symbols"]) == 0
    cfg = experiments.suite_config("symbols")
    assert (tmp_path / f"symbols-{cfg.hash()[:12]}" / "results.csv").exists()


def test_flagged_exit_2(tmp_path, monkeypatch):
    def flagged(cfg):
        return experiments.Outcome(["x"], [[math.nan]], flagged=True)
    monkeypatch.setitem(experiments.RUNNERS, "symbol-table", flagged)
    assert cli.main(["run", "--suite", "symbols", "--out", str(tmp_path)]) == 2
    assert json.loads((tmp_path / "metadata.json").read_text())["flagged"] is True


def test_solve_suite(tmp_path):
    assert cli.main(["run", "--suite", "solve-dirichlet", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "results.csv")
    assert set(rows[0]) == {"symbol", "t", "x", "u"}
    u0 = [float(r["u"]) for r in rows if float(r["t"]) == 0.0]
    assert max(u0) == pytest.approx(1.0, abs=0.01)
