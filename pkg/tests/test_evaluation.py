import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from knnrex import (
    BadParams,
    DegenerateVariance,
    EmptyData,
    EstimatorConfig,
    TooFewPoints,
    gen_ring,
    hellinger,
    icv_run,
    make_binning,
    welch_t,
)


def dense_hellinger(Y, Z, binning):
    """Dense-histogram oracle with identical clamp semantics."""
    def counts(data):
        clipped = np.column_stack(
            [np.clip(data[:, j], e[0], e[-1]) for j, e in enumerate(binning.edges)]
        )
        edges = [e if e.size > 2 or e[0] != e[-1] else np.asarray([e[0], e[0] + 1.0]) for e in binning.edges]
        h, _ = np.histogramdd(clipped, bins=edges)
        return h.ravel()

    cy = counts(Y)
    cz = counts(Z)
    py = np.sqrt(cy / len(Y))
    pz = np.sqrt(cz / len(Z))
    return float(np.sqrt(0.5 * np.sum((py - pz) ** 2)))


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------


def test_make_binning_unit_square():
    data = np.array([[0.0, 0.0], [1.0, 1.0], [0.3, 0.8]])
    spec = make_binning(data, 2)
    assert np.allclose(spec.edges[0], [0.0, 0.5, 1.0])
    assert np.allclose(spec.edges[1], [0.0, 0.5, 1.0])
    assert spec.bins_per_dim() == (2, 2)


def test_make_binning_constant_column():
    data = np.column_stack([np.arange(5.0), np.full(5, 2.0)])
    spec = make_binning(data, 4)
    assert spec.bins_per_dim()[1] == 1
    assert np.all(spec.assign(data)[:, 1] == 0)


def test_single_bin_means_zero_distance():
    rng = np.random.default_rng(0)
    Y, Z = rng.normal(size=(40, 2)), rng.normal(size=(30, 2)) + 5
    spec = make_binning(np.concatenate([Y, Z]), 1)
    assert hellinger(Y, Z, spec) == 0.0


def test_binning_boundaries_and_clamping():
    spec = make_binning(np.array([[0.0], [10.0]]), 5)
    idx = spec.assign(np.array([[0.0], [10.0], [-3.0], [13.0], [2.0], [1.9999]]))
    assert list(idx[:, 0]) == [0, 4, 0, 4, 1, 0]


def test_make_binning_errors():
    with pytest.raises(EmptyData):
        make_binning(np.empty((0, 2)), 3)
    with pytest.raises(BadParams):
        make_binning(np.zeros((3, 2)), 0)


# ---------------------------------------------------------------------------
# Hellinger
# ---------------------------------------------------------------------------


def test_hellinger_identical_and_disjoint():
    rng = np.random.default_rng(1)
    Y = rng.normal(size=(50, 3))
    spec = make_binning(Y, 4)
    assert hellinger(Y, Y.copy(), spec) == 0.0

    a = np.zeros((20, 1))
    b = np.ones((20, 1))
    spec = make_binning(np.concatenate([a, b]), 2)
    assert hellinger(a, b, spec) == pytest.approx(1.0)


def test_hellinger_hand_case():
    # |Y| = |Z| = 4, two bins, counts (2,2) vs (1,3).
    spec = make_binning(np.array([[0.0], [1.0]]), 2)
    Y = np.array([[0.2], [0.2], [0.7], [0.7]])
    Z = np.array([[0.2], [0.7], [0.7], [0.7]])
    expected = math.sqrt(
        0.5 * ((math.sqrt(0.5) - math.sqrt(0.25)) ** 2 + (math.sqrt(0.5) - math.sqrt(0.75)) ** 2)
    )
    assert hellinger(Y, Z, spec) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.18459, abs=5e-6)


def test_hellinger_symmetric_bounded_relabeling():
    rng = np.random.default_rng(2)
    for _ in range(10):
        Y = rng.normal(size=(rng.integers(5, 60), 2))
        Z = rng.normal(size=(rng.integers(5, 60), 2)) + rng.normal()
        spec = make_binning(np.concatenate([Y, Z]), 5)
        h1 = hellinger(Y, Z, spec)
        assert 0.0 <= h1 <= 1.0 + 1e-12
        assert h1 == pytest.approx(hellinger(Z, Y, spec), abs=1e-15)
        # row order is irrelevant
        assert h1 == pytest.approx(
            hellinger(Y[rng.permutation(len(Y))], Z[rng.permutation(len(Z))], spec), abs=1e-15
        )


def test_hellinger_zero_iff_proportional():
    spec = make_binning(np.array([[0.0], [1.0]]), 4)
    rng = np.random.default_rng(3)
    Y = rng.uniform(size=(30, 1))
    Z = np.repeat(Y, 3, axis=0)  # proportional histograms
    assert hellinger(Y, Z, spec) == pytest.approx(0.0, abs=1e-15)


def test_hellinger_matches_dense_oracle():
    rng = np.random.default_rng(4)
    for _ in range(30):
        d = int(rng.integers(1, 4))
        Y = rng.normal(size=(int(rng.integers(5, 200)), d))
        Z = rng.normal(size=(int(rng.integers(5, 200)), d)) + rng.normal(scale=0.5)
        bins = int(rng.integers(1, 11))
        spec = make_binning(np.concatenate([Y, Z]), bins)
        assert hellinger(Y, Z, spec) == pytest.approx(dense_hellinger(Y, Z, spec), abs=1e-12)


def test_hellinger_empty_errors():
    spec = make_binning(np.array([[0.0], [1.0]]), 2)
    with pytest.raises(EmptyData):
        hellinger(np.empty((0, 1)), np.zeros((3, 1)), spec)


# ---------------------------------------------------------------------------
# Welch's t-test
# ---------------------------------------------------------------------------


def test_welch_identity():
    t, dof, p = welch_t(1.3, 0.2, 50, 1.3, 0.2, 50)
    assert t == 0.0 and p == 1.0


def test_welch_hand_case():
    t, dof, p = welch_t(1.0, 1.0, 100, 2.0, 1.0, 100)
    assert t == pytest.approx(-7.0710678118654755, abs=1e-9)
    assert dof == pytest.approx(198.0, abs=1e-9)
    assert p < 1e-10


def test_welch_against_scipy_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        ma, mb = rng.normal(size=2)
        sa, sb = rng.uniform(0.1, 3.0, size=2)
        na, nb = int(rng.integers(2, 500)), int(rng.integers(2, 500))
        t, dof, p = welch_t(ma, sa, na, mb, sb, nb)
        res = scipy_stats.ttest_ind_from_stats(ma, sa, na, mb, sb, nb, equal_var=False)
        assert t == pytest.approx(res.statistic, abs=1e-6)
        assert p == pytest.approx(res.pvalue, abs=1e-6)


def test_welch_p_against_t_quantiles():
    # Two-sided p at the 97.5% t quantile must be 0.05, for dof 1, 10, 100.
    from knnrex.evaluation import _betainc_reg

    quantiles = {1: 12.706204736432095, 10: 2.2281388519649385, 100: 1.9839715184496334}
    for dof, q in quantiles.items():
        p = _betainc_reg(dof / 2.0, 0.5, dof / (dof + q * q))
        assert p == pytest.approx(0.05, abs=1e-6)


def test_welch_degenerate():
    with pytest.raises(DegenerateVariance):
        welch_t(1.0, 0.0, 10, 2.0, 0.0, 10)
    with pytest.raises(BadParams):
        welch_t(1.0, 1.0, 1, 2.0, 1.0, 10)


# ---------------------------------------------------------------------------
# Inverted cross-validation
# ---------------------------------------------------------------------------


def test_icv_fold_arithmetic_and_report():
    data = gen_ring(430, np.random.default_rng(6))
    cfg = EstimatorConfig(method="fixed_gaussian", h=0.1, seed=3)
    report = icv_run(data, cfg, folds=4, bins_per_dim=5)
    assert report.fold_size == 107
    assert report.n_used == 428
    assert report.population_size == 3 * 107
    assert report.fold_hellinger.shape == (4,)
    assert report.baseline_hellinger.shape == (4,)
    assert np.all(report.fold_seconds >= 0)
    assert report.mean == pytest.approx(float(np.mean(report.fold_hellinger)), abs=1e-12)
    assert report.std == pytest.approx(float(np.std(report.fold_hellinger, ddof=1)), abs=1e-12)
    assert report.config["method"] == "fixed_gaussian"


def test_icv_reproducible_and_thread_invariant():
    data = gen_ring(200, np.random.default_rng(7))
    cfg = EstimatorConfig(method="knn_rex", k=8, m=3, seed=5)
    r1 = icv_run(data, cfg, folds=4, bins_per_dim=5)
    r2 = icv_run(data, cfg, folds=4, bins_per_dim=5)
    r4 = icv_run(data, cfg, folds=4, bins_per_dim=5, threads=4)
    assert np.array_equal(r1.fold_hellinger, r2.fold_hellinger)
    assert np.array_equal(r1.baseline_hellinger, r2.baseline_hellinger)
    assert np.array_equal(r1.fold_hellinger, r4.fold_hellinger)


def test_icv_methods_run():
    data = gen_ring(120, np.random.default_rng(8))
    for cfg in (
        EstimatorConfig(method="knn_rex", k=6, m=3, seed=1),
        EstimatorConfig(method="bmp", k=6, h=0.3, seed=1),
        EstimatorConfig(method="km_rex", L=3, m=3, seed=1, stall_limit=30),
    ):
        report = icv_run(data, cfg, folds=3, bins_per_dim=4)
        assert np.isfinite(report.mean)


def test_icv_errors():
    data = gen_ring(50, np.random.default_rng(9))
    with pytest.raises(BadParams):
        icv_run(data, EstimatorConfig(method="fixed_gaussian", h=0.1), folds=1)
    with pytest.raises(TooFewPoints):
        icv_run(data[:3], EstimatorConfig(method="fixed_gaussian", h=0.1), folds=4)
    with pytest.raises(BadParams):
        icv_run(data, EstimatorConfig(method="knn_rex_corrected"), folds=2)
