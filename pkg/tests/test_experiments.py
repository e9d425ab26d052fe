"""Experiment harness: config resolution, cell seeding, sweeps, CSV output."""

import csv

import numpy as np
import pytest

from mfm import (
    ChainOutput,
    ConfigError,
    Geometric,
    UniformBounded,
    generate_series,
    resolve_model,
    run_sweep,
    summarize,
    sweep_config_from_text,
    write_errors_csv,
    write_posterior_csv,
    write_summary_csv,
)
from mfm.experiments import ErrorRow, _cell_seed, _run_cell

MIX_LINES = """
mixture.families = ["normal", "normal"]
mixture.locs = [-5.0, 5.0]
mixture.scales = [1.5, 1.0]
mixture.weights = [0.4, 0.6]
"""


def small_cfg(extra=""):
    return sweep_config_from_text(
        MIX_LINES + "sweep.sizes = [40]\nsweep.seeds = [1]\n"
        "chain.iterations = 200\nchain.burn_in = 50\n" + extra
    )


def test_defaults():
    cfg = sweep_config_from_text(MIX_LINES)
    assert cfg.sizes == (1000,)
    assert cfg.seeds == (1, 2, 3)
    assert cfg.prior_mode == "fixed"
    assert cfg.count_prior == Geometric(0.1)
    assert cfg.alpha == 2.0 and cfg.gamma == 1.0
    assert (cfg.beta, cfg.beta_u, cfg.beta_v_scale) == (None, 0.2, 10.0)
    assert cfg.chain.iterations == 20_000 and cfg.chain.burn_in == 2_000
    assert cfg.dataset == "mixture"


def test_config_validation_errors():
    with pytest.raises(ConfigError, match="unknown config keys"):
        sweep_config_from_text(MIX_LINES + "model.alpa = 2\n")
    with pytest.raises(ConfigError, match="ascending"):
        sweep_config_from_text(MIX_LINES + "sweep.sizes = [200, 100]\n")
    with pytest.raises(ConfigError, match="uniform"):
        sweep_config_from_text(MIX_LINES + 'sweep.prior_mode = "bounded"\n')
    with pytest.raises(ConfigError, match="exactly one"):
        sweep_config_from_text(MIX_LINES + "model.beta = 1.0\nmodel.beta_u = 0.2\nmodel.beta_v = 5.0\n")
    with pytest.raises(ConfigError, match="prior.kmax"):
        sweep_config_from_text(MIX_LINES + 'prior.kind = "uniform"\n')
    with pytest.raises(ConfigError, match="generator.path"):
        sweep_config_from_text('generator.kind = "file"\n')
    with pytest.raises(ConfigError, match="equal length"):
        sweep_config_from_text(
            'mixture.families = ["normal"]\nmixture.locs = [0, 1]\n'
            "mixture.scales = [1]\nmixture.weights = [1.0]\n"
        )
    with pytest.raises(ConfigError, match="contaminant"):
        sweep_config_from_text(MIX_LINES + 'generator.kind = "contamination"\n')


def test_bounded_mode_config():
    cfg = sweep_config_from_text(
        MIX_LINES + 'sweep.prior_mode = "bounded"\nprior.kind = "uniform"\nprior.kmax = 6\n'
    )
    assert cfg.count_prior == UniformBounded(6)


def test_generate_series_deterministic_and_prefix_stable():
    base = MIX_LINES + "sweep.sizes = [50, 200]\n"
    a = generate_series(sweep_config_from_text(base))
    b = generate_series(sweep_config_from_text(base))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (200, 1)
    c = generate_series(sweep_config_from_text(base + "data.seed = 9\n"))
    assert not np.array_equal(a, c)


def test_generate_series_from_file(tmp_path):
    path = tmp_path / "data.csv"
    rows = np.arange(12.0).reshape(-1, 1)
    np.savetxt(path, rows, delimiter=",")
    cfg = sweep_config_from_text(
        f'generator.kind = "file"\ngenerator.path = "{path}"\nsweep.sizes = [5, 10]\n'
    )
    out = generate_series(cfg)
    np.testing.assert_array_equal(out, rows[:10])
    short = sweep_config_from_text(
        f'generator.kind = "file"\ngenerator.path = "{path}"\nsweep.sizes = [20]\n'
    )
    with pytest.raises(ConfigError, match="rows"):
        generate_series(short)


def test_resolve_model_fixed_vs_varying():
    # prefix spans [0, 1]; the full series spans [0, 10]
    full = np.concatenate([np.linspace(0, 1, 5), [10.0]]).reshape(-1, 1)
    prefix = full[:5]
    fixed = sweep_config_from_text(MIX_LINES + "model.beta = 2.0\n")
    model = resolve_model(fixed, prefix, full)
    assert model.m[0] == pytest.approx(5.0)  # midrange of the full series
    assert model.beta == 2.0
    assert model.c[0] == 1.0  # conjugate base measure: mean precision tied to tau

    varying = sweep_config_from_text(
        MIX_LINES + 'sweep.prior_mode = "varying"\nmodel.beta = 2.0\n'
    )
    vm = resolve_model(varying, prefix, full)
    assert vm.m[0] == pytest.approx(0.5)  # midrange of the prefix only
    assert vm.c[0] == 1.0


def test_resolve_model_hyperprior_scaling():
    full = np.array([[0.0], [10.0]])
    cfg = sweep_config_from_text(MIX_LINES)  # defaults: beta_u=0.2, beta_v_scale=10
    model = resolve_model(cfg, full, full)
    assert model.beta is None
    # beta ~ Gamma(u, scale 10/kappa): rate = kappa/10, so the hyperprior
    # mean u*10/kappa tracks the squared data range (kappa = 1/range^2)
    assert model.beta_prior.v == pytest.approx(0.01 / 10.0)
    assert model.beta_prior.u == pytest.approx(0.2)
    assert model.beta_prior.mean == pytest.approx(0.2 * 10.0 / 0.01)
    assert model.c[0] == 1.0  # kappa drives the beta hyperprior only, not c


def test_resolve_model_explicit_overrides():
    full = np.array([[0.0], [10.0]])
    cfg = sweep_config_from_text(
        MIX_LINES + "model.beta = 1.0\nmodel.m = 3.0\nmodel.kappa = 0.5\nmodel.c = 2.5\n"
    )
    model = resolve_model(cfg, full, full)
    assert model.m[0] == 3.0
    assert model.c[0] == 2.5


def test_resolve_model_beta_v_scale_needs_univariate():
    full = np.zeros((4, 2))
    full[0] = [1, 1]
    cfg = sweep_config_from_text(MIX_LINES)
    with pytest.raises(ConfigError, match="univariate"):
        resolve_model(cfg, full, full)


def test_cell_seeds_distinct_and_stable():
    seeds = {(_cell_seed(s, n)) for s in (1, 2, 3) for n in (50, 200, 1000)}
    assert len(seeds) == 9
    assert _cell_seed(1, 50) == _cell_seed(1, 50)


def fake_out(trace_k):
    trace_k = np.asarray(trace_k, dtype=np.int64)
    return ChainOutput(trace_t=trace_k.copy(), trace_k=trace_k,
                       trace_beta=np.ones(len(trace_k)), sm_proposed=4, sm_accepted=1,
                       posterior_k=np.array([1.0]), wallclock=0.0)


def test_summarize_trims_and_breaks_ties_low():
    post, mean_k, mode_k, stats = summarize(fake_out([1, 1, 2, 2]))
    np.testing.assert_allclose(post, [0.5, 0.5])
    assert mode_k == 1  # tie resolved toward the smaller count
    assert mean_k == pytest.approx(1.5)
    assert stats["sm_accept_rate"] == 0.25

    post, mean_k, mode_k, _ = summarize(fake_out([1, 3, 3]))
    np.testing.assert_allclose(post, [1 / 3, 0.0, 2 / 3])
    assert mode_k == 3
    assert mean_k == pytest.approx(1 / 3 + 3 * 2 / 3)
    with pytest.raises(ValueError):
        summarize(fake_out([]))


def test_run_cell_rows_sum_to_one():
    rows = _run_cell(small_cfg(), seed=1, n=40)
    total = sum(r.probability for r in rows)
    assert total == pytest.approx(1.0, abs=1e-9)
    assert all(r.N == 40 and r.seed == 1 and r.dataset == "mixture" for r in rows)
    assert [r.k for r in rows] == list(range(1, len(rows) + 1))


def test_run_sweep_serial_equals_parallel():
    cfg = sweep_config_from_text(
        MIX_LINES + "sweep.sizes = [30, 60]\nsweep.seeds = [1, 2]\n"
        "chain.iterations = 150\nchain.burn_in = 30\n"
    )
    rows_serial, err_serial = run_sweep(cfg, threads=1)
    rows_par, err_par = run_sweep(cfg, threads=2)
    assert err_serial == err_par == []
    assert rows_serial == rows_par  # frozen dataclass equality, exact floats
    # sorted by (dataset, seed, N, k)
    keys = [(r.dataset, r.seed, r.N, r.k) for r in rows_serial]
    assert keys == sorted(keys)


def test_run_sweep_isolates_cell_failures(tmp_path):
    path = tmp_path / "tiny.csv"
    np.savetxt(path, np.arange(5.0).reshape(-1, 1), delimiter=",")
    cfg = sweep_config_from_text(
        f'generator.kind = "file"\ngenerator.path = "{path}"\n'
        "sweep.sizes = [10]\nsweep.seeds = [1, 2]\n"
        "chain.iterations = 50\nchain.burn_in = 10\n"
    )
    rows, errors = run_sweep(cfg)
    assert rows == []
    assert len(errors) == 2
    assert "rows" in errors[0].error


def test_csv_writers(tmp_path):
    rows = _run_cell(small_cfg(), seed=1, n=40)
    ppath = tmp_path / "posterior_k.csv"
    spath = tmp_path / "summary.csv"
    epath = tmp_path / "errors.csv"
    write_posterior_csv(rows, ppath)
    write_summary_csv(rows, spath)
    write_errors_csv([ErrorRow("mixture", 1, 40, "boom")], epath)

    with open(ppath, newline="", encoding="utf-8") as fh:
        recs = list(csv.DictReader(fh))
    assert list(recs[0]) == ["dataset", "seed", "N", "prior_mode", "k", "probability"]
    assert len(recs) == len(rows)
    assert abs(sum(float(r["probability"]) for r in recs) - 1.0) <= 1e-9

    with open(spath, newline="", encoding="utf-8") as fh:
        srecs = list(csv.DictReader(fh))
    assert list(srecs[0]) == ["dataset", "seed", "N", "mean_k", "mode_k", "sm_accept_rate"]
    assert len(srecs) == 1  # one row per (dataset, seed, N) group

    with open(epath, newline="", encoding="utf-8") as fh:
        erecs = list(csv.DictReader(fh))
    assert erecs[0]["error"] == "boom"
    # LF line endings throughout
    assert b"\r" not in ppath.read_bytes() + spath.read_bytes() + epath.read_bytes()
