"""Command-line interface: subcommands, file outputs, exit codes."""

import csv
import json

import numpy as np
import pytest

from mfm.cli import main

CFG = """
dataset.name = "toy"
mixture.families = ["normal", "normal"]
mixture.locs = [-4.0, 4.0]
mixture.scales = [1.0, 1.0]
mixture.weights = [0.5, 0.5]
sweep.sizes = [30, 60]
sweep.seeds = [1, 2]
chain.iterations = 150
chain.burn_in = 30
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text(CFG, encoding="utf-8")
    return str(p)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_generate(cfg_path, tmp_path, capsys):
    out = tmp_path / "gen"
    assert main(["generate", "--config", cfg_path, "--out", str(out)]) == 0
    data = np.loadtxt(out / "data.csv", delimiter=",").reshape(-1, 1)
    labels = np.loadtxt(out / "labels.csv", delimiter=",")
    assert data.shape == (60, 1)
    assert set(labels) <= {0.0, 1.0}
    assert "60 x 1" in capsys.readouterr().out

    # --seed overrides data.seed and changes the sample
    out2 = tmp_path / "gen2"
    main(["generate", "--config", cfg_path, "--out", str(out2), "--seed", "5"])
    data2 = np.loadtxt(out2 / "data.csv", delimiter=",").reshape(-1, 1)
    assert not np.array_equal(data, data2)


def test_run_and_summarize(cfg_path, tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["run", "--config", cfg_path, "--out", str(out),
               "--iters", "120", "--burnin", "40"])
    assert rc == 0
    doc = json.loads((out / "chain.json").read_text(encoding="utf-8"))
    assert doc["meta"] == {"dataset": "toy", "seed": 1, "N": 60, "prior_mode": "fixed"}
    assert len(doc["chain"]["trace_t"]) == 120 - 40

    recs = read_csv(out / "posterior_k.csv")
    assert abs(sum(float(r["probability"]) for r in recs) - 1.0) <= 1e-9
    assert all(r["N"] == "60" for r in recs)
    srecs = read_csv(out / "summary.csv")
    assert len(srecs) == 1

    sumdir = tmp_path / "resum"
    rc = main(["summarize", "--in", str(out / "chain.json"), "--out", str(sumdir)])
    assert rc == 0
    again = read_csv(sumdir / "summary.csv")
    assert again == srecs
    assert "mean_k=" in capsys.readouterr().out


def test_run_repeat_is_byte_identical(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", cfg_path, "--out", str(a)])
    main(["run", "--config", cfg_path, "--out", str(b)])
    assert (a / "posterior_k.csv").read_bytes() == (b / "posterior_k.csv").read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_sweep(cfg_path, tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", cfg_path, "--out", str(out)]) == 0
    recs = read_csv(out / "posterior_k.csv")
    cells = {(r["seed"], r["N"]) for r in recs}
    assert cells == {("1", "30"), ("1", "60"), ("2", "30"), ("2", "60")}
    assert read_csv(out / "errors.csv") == []
    assert len(read_csv(out / "summary.csv")) == 4
    assert "4 cells, 0 failed" in capsys.readouterr().out


def test_sweep_reports_failures(tmp_path):
    data = tmp_path / "five.csv"
    np.savetxt(data, np.arange(5.0).reshape(-1, 1), delimiter=",")
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(
        f'generator.kind = "file"\ngenerator.path = "{data}"\n'
        "sweep.sizes = [9]\nsweep.seeds = [1]\n"
        "chain.iterations = 60\nchain.burn_in = 10\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 1
    errs = read_csv(out / "errors.csv")
    assert len(errs) == 1 and "rows" in errs[0]["error"]


def test_exact(tmp_path):
    cfg = tmp_path / "exact.cfg"
    cfg.write_text(
        CFG.replace("sweep.sizes = [30, 60]", "sweep.sizes = [5]")
        + "model.beta = 1.0\ndata.seed = 3\n",
        encoding="utf-8",
    )
    out = tmp_path / "exact"
    assert main(["exact", "--config", str(cfg), "--out", str(out)]) == 0
    recs = read_csv(out / "posterior_k.csv")
    assert all(r["prior_mode"] == "exact" for r in recs)
    assert all(r["seed"] == "3" for r in recs)  # data seed, no chain replicate
    assert abs(sum(float(r["probability"]) for r in recs) - 1.0) <= 1e-9


def test_exact_requires_fixed_beta(cfg_path, tmp_path, capsys):
    rc = main(["exact", "--config", cfg_path, "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "model.beta" in capsys.readouterr().err


def test_exact_rejects_large_n(tmp_path, capsys):
    cfg = tmp_path / "big.cfg"
    cfg.write_text(
        CFG.replace("sweep.sizes = [30, 60]", "sweep.sizes = [12]") + "model.beta = 1.0\n",
        encoding="utf-8",
    )
    assert main(["exact", "--config", str(cfg), "--out", str(tmp_path / "y")]) == 2
    assert "N <= 10" in capsys.readouterr().err


def test_error_exits(tmp_path, capsys):
    missing = str(tmp_path / "nope.cfg")
    assert main(["run", "--config", missing, "--out", str(tmp_path / "o")]) == 2
    capsys.readouterr()
    bad = tmp_path / "typo.cfg"
    bad.write_text(CFG + "model.alpa = 2\n", encoding="utf-8")
    assert main(["sweep", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "unknown config keys" in capsys.readouterr().err
