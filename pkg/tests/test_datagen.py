"""Synthetic data generators, transforms, and CSV round-trips."""

import math

import numpy as np
import pytest
from scipy import stats

from mfm import (
    Component,
    ContaminationSpec,
    MixtureSpec,
    contaminate,
    empirical_hyperparams,
    load_matrix,
    log2_standardize,
    nested_series,
    sample_mixture,
    save_matrix,
)

GAUSS2 = MixtureSpec(
    components=(Component("normal", -5.0, 1.5), Component("normal", 5.0, 1.0)),
    weights=(0.4, 0.6),
)
LAPLACE2 = MixtureSpec(
    components=(Component("laplace", -5.0, 1.5), Component("laplace", 5.0, 1.0)),
    weights=(0.4, 0.6),
)


def test_component_validation():
    with pytest.raises(ValueError):
        Component("cauchy", 0.0, 1.0)
    with pytest.raises(ValueError):
        Component("normal", 0.0, 0.0)
    with pytest.raises(ValueError):
        MixtureSpec(components=(Component("normal", 0, 1),), weights=(0.7,))
    with pytest.raises(ValueError):
        ContaminationSpec(base=GAUSS2, contaminant=Component("laplace", 0, 1), eps=1.5)


def test_component_laplace_density_and_cdf():
    c = Component("laplace", 2.0, 0.5)
    xs = np.array([0.0, 2.0, 3.0])
    want = stats.laplace(2.0, 0.5)
    np.testing.assert_allclose(c.logpdf(xs), want.logpdf(xs), rtol=1e-12)
    np.testing.assert_allclose(c.cdf(xs), want.cdf(xs), rtol=1e-12)


def test_component_normal_density_and_cdf():
    c = Component("normal", -1.0, 2.0)
    xs = np.linspace(-6, 4, 7)
    want = stats.norm(-1.0, 2.0)
    np.testing.assert_allclose(c.logpdf(xs), want.logpdf(xs), rtol=1e-12)
    np.testing.assert_allclose(c.cdf(xs), want.cdf(xs), rtol=1e-12)


def test_mixture_logpdf_is_weighted_sum():
    xs = np.array([-5.0, 0.0, 5.0])
    dens = 0.4 * stats.norm(-5, 1.5).pdf(xs) + 0.6 * stats.norm(5, 1.0).pdf(xs)
    np.testing.assert_allclose(np.exp(GAUSS2.logpdf(xs)), dens, rtol=1e-12)
    np.testing.assert_allclose(
        GAUSS2.cdf(xs),
        0.4 * stats.norm(-5, 1.5).cdf(xs) + 0.6 * stats.norm(5, 1.0).cdf(xs),
        rtol=1e-12,
    )


def test_sample_mixture_label_proportions():
    rng = np.random.default_rng(0)
    n = 100_000
    data, labels = sample_mixture(GAUSS2, n, rng)
    assert data.shape == (n, 1)
    for j, w in enumerate(GAUSS2.weights):
        se = math.sqrt(w * (1 - w) / n)
        assert abs((labels == j).mean() - w) <= 3 * se


def test_sample_mixture_distribution_ks():
    rng = np.random.default_rng(1)
    data, _ = sample_mixture(LAPLACE2, 100_000, rng)
    d, _ = stats.kstest(data[:, 0], lambda x: LAPLACE2.cdf(x))
    assert d < 0.01, d


def test_sample_mixture_labels_match_rows():
    rng = np.random.default_rng(2)
    data, labels = sample_mixture(GAUSS2, 2000, rng)
    # every labeled row should sit within 6 SDs of its component mean
    for j, comp in enumerate(GAUSS2.components):
        rows = data[labels == j, 0]
        assert np.all(np.abs(rows - comp.loc) < 6 * comp.scale)


def test_contaminate_epsilon_extremes_and_rate():
    cs0 = ContaminationSpec(base=GAUSS2, contaminant=Component("laplace", 0, 1), eps=0.0)
    data, flags = contaminate(cs0, 500, np.random.default_rng(3))
    assert not flags.any()
    cs1 = ContaminationSpec(base=GAUSS2, contaminant=Component("laplace", 0, 1), eps=1.0)
    data, flags = contaminate(cs1, 500, np.random.default_rng(4))
    assert flags.all()

    cs = ContaminationSpec(base=GAUSS2, contaminant=Component("laplace", 0, 1), eps=0.1)
    n = 10_000
    data, flags = contaminate(cs, n, np.random.default_rng(5))
    se = math.sqrt(0.1 * 0.9 / n)
    assert abs(flags.mean() - 0.1) <= 3 * se
    assert data.shape == (n, 1)

    # the contaminant may itself be a mixture (draw returns an n x 1 matrix)
    one = MixtureSpec(components=(Component("laplace", 0, 1),), weights=(1.0,))
    cs_mix = ContaminationSpec(base=GAUSS2, contaminant=one, eps=0.3)
    data, flags = contaminate(cs_mix, 200, np.random.default_rng(6))
    assert data.shape == (200, 1)
    assert 0 < flags.sum() < 200


def test_contamination_density_mixes():
    cs = ContaminationSpec(base=GAUSS2, contaminant=Component("laplace", 0, 1), eps=0.1)
    xs = np.array([-2.0, 0.0, 1.0])
    want = 0.9 * np.exp(GAUSS2.logpdf(xs)) + 0.1 * stats.laplace(0, 1).pdf(xs)
    np.testing.assert_allclose(np.exp(cs.logpdf(xs)), want, rtol=1e-12)


def test_generation_deterministic_by_seed():
    a, _ = sample_mixture(GAUSS2, 100, np.random.default_rng(9))
    b, _ = sample_mixture(GAUSS2, 100, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_nested_series_prefix_property():
    rng = np.random.default_rng(6)
    mat = rng.normal(size=(500, 1))
    series = nested_series(mat, [50, 200, 500])
    np.testing.assert_array_equal(series.prefix(50), series.prefix(200)[:50])
    np.testing.assert_array_equal(series.prefix(500), mat)
    with pytest.raises(ValueError):
        series.prefix(100)
    with pytest.raises(ValueError):
        nested_series(mat, [200, 50])
    with pytest.raises(ValueError):
        nested_series(mat, [50, 501])


def test_log2_standardize_two_point_column():
    counts = np.array([[0.0], [3.0]])
    out = log2_standardize(counts)
    np.testing.assert_allclose(out, [[-1.0], [1.0]], atol=1e-12)
    # already-standardized data is a fixpoint of center/scale (not of log2)
    again = (out - out.mean(axis=0)) / out.std(axis=0)
    np.testing.assert_allclose(again, out, atol=1e-12)


def test_log2_standardize_rejects_constant_column():
    with pytest.raises(ValueError, match="column 1"):
        log2_standardize(np.array([[0.0, 2.0], [3.0, 2.0]]))
    with pytest.raises(ValueError):
        log2_standardize(np.array([[-1.0], [1.0]]))  # negative counts


def test_empirical_hyperparams():
    m, kappa = empirical_hyperparams(np.array([[0.0], [10.0], [4.0]]))
    assert m == pytest.approx([5.0])
    assert kappa == pytest.approx([0.01])
    with pytest.raises(ValueError, match="zero range"):
        empirical_hyperparams(np.array([[1.0], [1.0]]))
    with pytest.raises(ValueError):
        empirical_hyperparams(np.array([[1.0]]))


def test_matrix_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    mat = rng.normal(size=(20, 3)) * 10.0 ** rng.integers(-8, 8, size=(20, 3))
    path = tmp_path / "m.csv"
    save_matrix(path, mat)
    np.testing.assert_array_equal(load_matrix(path), mat)  # exact, via repr

    save_matrix(path, mat, header=["a", "b", "c"])
    np.testing.assert_array_equal(load_matrix(path, fmt="csv-header"), mat)
    with pytest.raises(ValueError):
        save_matrix(path, mat, header=["a", "b"])


def test_load_matrix_error_context(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1.0,2.0\n3.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="line 2"):
        load_matrix(p)
    p.write_text("1.0,2.0\n3.0,oops\n", encoding="utf-8")
    with pytest.raises(ValueError, match="line 2, column 2"):
        load_matrix(p)
    p.write_text("", encoding="utf-8")
    with pytest.raises(ValueError, match="no data rows"):
        load_matrix(p)
    with pytest.raises(ValueError):
        load_matrix(p, fmt="tsv")
