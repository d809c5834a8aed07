import csv
import filecmp

import numpy as np
import pytest

from msfc import cli
from msfc.config import parse_config
from msfc.exceptions import (
    CapabilityError,
    ConfigError,
    DataError,
    DivergenceError,
    IngestionError,
    NumericalError,
)
from msfc.ingest import ingest, read_price_csv, write_series_csv
from msfc.report import TIMING_FILES
from msfc.series import Series

TINY = """
[experiment]
horizons = 4
n_seeded_runs = 1
d_max = 6
[train]
max_epochs = 5
n_restarts = 1
[spa]
n_bootstrap = 200
"""


def write_prices(path, values, start="2000-01-07"):
    write_series_csv(Series.from_values(values, start=start), path)
    return path


@pytest.fixture
def data(tmp_path):
    rng = np.random.default_rng(0)
    t = np.arange(160)
    values = 50 + 5 * np.sin(2 * np.pi * t / 26) + np.cumsum(rng.normal(0, 0.5, 160))
    return write_prices(tmp_path / "prices.csv", values)


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ingestion -------------------------------------------------------------------


def test_ingest_wti_length():
    s = read_price_csv(cli.wti_path()).series
    assert len(s) == 626


def test_ingest_drops_blank_price(tmp_path, caplog):
    path = tmp_path / "p.csv"
    path.write_text("date,price\n2000-01-07,25.5\n2000-01-14,\n2000-01-21,26.1\n2000-01-28,27\n")
    summary = read_price_csv(path)
    assert len(summary.series) == 3
    assert summary.dropped == [3]
    assert any("row 3" in line for line in summary.lines())


def test_ingest_resorts_out_of_order(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("Date,Price\n01/21/2000,3\n01/07/2000,1\n01/14/2000,2\n")
    summary = read_price_csv(path)
    assert summary.resorted
    assert list(summary.series.values) == [1.0, 2.0, 3.0]
    assert any("sorted" in line for line in summary.lines())


def test_ingest_rejects_duplicates_and_bad_files(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("date,price\n2000-01-07,1\n2000-01-07,2\n2000-01-14,3\n")
    with pytest.raises(IngestionError, match="duplicate"):
        read_price_csv(path)
    path.write_text("")
    with pytest.raises(IngestionError, match="empty"):
        read_price_csv(path)
    path.write_text("date,price\nnot-a-date,1\n2000-01-14,3\n")
    with pytest.raises(IngestionError, match="row 2"):
        read_price_csv(path)
    with pytest.raises(IngestionError):
        read_price_csv(tmp_path / "missing.csv")


def test_ingest_idempotent(tmp_path):
    first = ingest(cli.wti_path())
    write_series_csv(first, tmp_path / "a.csv")
    second = ingest(tmp_path / "a.csv")
    assert second == first
    write_series_csv(second, tmp_path / "b.csv")
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)


# configuration ---------------------------------------------------------------


def test_config_parses_and_rejects_unknown():
    cfg = parse_config(TINY)
    assert cfg.horizons == (4,) and cfg.train.max_epochs == 5 and cfg.d_max == 6
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("[train]\nepochs = 3\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[model]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[spa]\nn_bootstrap = 10\n")
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nhorizons = 4, 60\n")


# commands --------------------------------------------------------------------


def test_missing_data_is_usage_error(capsys):
    assert cli.main(["experiment"]) == 1
    assert "usage" in capsys.readouterr().err


def test_decompose(tmp_path, data):
    out = tmp_path / "dec"
    assert cli.main(["decompose", "--data", str(data), "--boundary", "truncate", "--out-dir", str(out), "-q"]) == 0
    rows = read_rows(out / "imfs_truncate.csv")
    assert rows[0][0] == "date" and rows[0][-1] == "residue" and len(rows) == 161
    total = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).sum(axis=1)
    np.testing.assert_allclose(total, read_price_csv(data).series.values, rtol=1e-12)


def test_forecast_random_walk_constant(tmp_path):
    data = write_prices(tmp_path / "flat.csv", np.full(120, 42.0))
    out = tmp_path / "fc"
    assert cli.main(["forecast", "--data", str(data), "--model", "random_walk", "--horizon", "4", "--out-dir", str(out), "-q"]) == 0
    rows = read_rows(out / "forecasts" / "random_walk_naive_H4.csv")
    assert {r[3] for r in rows[1:]} == {"42"}


def test_experiment_writes_report(tmp_path, data, tiny):
    out = tmp_path / "exp"
    args = ["experiment", "--data", str(data), "--config", str(tiny), "--out-dir", str(out), "-q"]
    assert cli.main(args + ["--model", "random_walk", "--model", "fnn"]) == 0
    for name in ("accuracy.csv", "spa_pvalues.csv", "timing.csv", "manifest.txt", "summary.txt", "lags.csv"):
        assert (out / name).exists()
    assert len(list((out / "forecasts").glob("*.csv"))) == 4
    assert len(list((out / "plots").glob("*.csv"))) == 4
    header = read_rows(out / "accuracy.csv")[0]
    assert header == ["metric", "horizon", "random_walk", "fnn_iterated", "fnn_direct", "fnn_mimo"]


def test_experiment_is_byte_identical(tmp_path, data, tiny):
    outs = []
    for k, jobs in enumerate(("1", "2")):
        out = tmp_path / f"run{k}"
        assert cli.main(["experiment", "--data", str(data), "--config", str(tiny), "--out-dir", str(out), "--jobs", jobs, "-q"]) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert len(files) >= 30
    for rel in files:
        if rel.name in TIMING_FILES:
            continue
        assert filecmp.cmp(outs[0] / rel, outs[1] / rel, shallow=False), rel


def test_seed_precedence(tmp_path, data, tiny, monkeypatch):
    def seed_of(extra):
        out = tmp_path / "seed"
        args = ["forecast", "--data", str(data), "--config", str(tiny), "--model", "random_walk", "--horizon", "4", "--out-dir", str(out), "-q"]
        assert cli.main(args + extra) == 0
        text = (out / "manifest.txt").read_text()
        return next(line for line in text.splitlines() if line.startswith("base_seed"))

    assert seed_of([]) == "base_seed = 0"
    monkeypatch.setenv("MSFC_SEED", "17")
    assert seed_of([]) == "base_seed = 17"
    assert seed_of(["--seed", "5"]) == "base_seed = 5"
    monkeypatch.setenv("MSFC_SEED", "x")
    assert cli.main(["forecast", "--data", str(data), "--model", "random_walk", "--horizon", "4", "-q"]) == 1


def test_spa_command(tmp_path, data, tiny):
    out = tmp_path / "exp"
    base = ["--data", str(data), "--config", str(tiny), "-q"]
    assert cli.main(["experiment", *base, "--out-dir", str(out), "--model", "random_walk", "--model", "fnn", "--no-plots"]) == 0
    spa_out = tmp_path / "spa"
    assert cli.main(["spa", *base, "--forecasts", str(out / "forecasts"), "--out-dir", str(spa_out)]) == 0
    ours = read_rows(spa_out / "spa_pvalues.csv")
    theirs = read_rows(out / "spa_pvalues.csv")
    # same losses and bootstrap, so the recomputed consistent p-values agree
    cols = ours[0][2:]
    for row_a, row_b in zip(ours[1:], theirs[1:]):
        b = dict(zip(theirs[0][2:], row_b[2:]))
        for c, v in zip(cols, row_a[2:]):
            assert float(v) == pytest.approx(float(b[c]), abs=1e-12)
    assert cli.main(["spa", *base, "--forecasts", str(tmp_path), "--out-dir", str(spa_out)]) == 2


@pytest.mark.parametrize(
    "exc, code",
    [
        (cli.UsageError("x"), 1),
        (ConfigError("x"), 1),
        (CapabilityError("x"), 1),
        (DataError("x"), 2),
        (IngestionError("x"), 2),
        (OSError("x"), 2),
        (NumericalError("x"), 3),
        (DivergenceError("x"), 3),
        (FloatingPointError("x"), 3),
        (np.linalg.LinAlgError("x"), 3),
    ],
)
def test_exit_codes_by_fault_injection(monkeypatch, capsys, exc, code):
    def boom(args, say):
        raise exc

    monkeypatch.setitem(cli.COMMANDS, "decompose", boom)
    assert cli.main(["decompose", "--data", "wti", "-q"]) == code
    err = capsys.readouterr().err
    assert "hint:" in err
