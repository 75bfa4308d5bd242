import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_cfs_data
from oracles import best_merit_reference, bins_reference, su_reference
from weldid.exceptions import EmptySubset, LengthMismatch, TooManyFeatures
from weldid.feature_select import (
    CfsSelector,
    CorrelationTable,
    FeatureSubset,
    best_first_select,
    cfs_merit,
    discretize_equal_width,
    exhaustive_select,
    symmetric_uncertainty,
)
from weldid.preprocess import Dataset


def corr_table(r_cf, r_ff):
    names = tuple(f"f{i}" for i in range(len(r_cf)))
    return CorrelationTable(np.asarray(r_cf, float), np.asarray(r_ff, float), names)


def test_discretize_examples():
    assert discretize_equal_width([0, 1, 2, 3], 2).tolist() == [0, 0, 1, 1]
    assert discretize_equal_width([4.0, 4.0, 4.0]).tolist() == [0, 0, 0]
    assert discretize_equal_width([0, 10], 10).tolist() == [0, 9]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.integers(2, 12))
def test_discretize_matches_reference(column, n_bins):
    got = discretize_equal_width(column, n_bins).tolist()
    assert got == bins_reference(column, n_bins)


def test_symmetric_uncertainty_examples():
    assert symmetric_uncertainty([0, 1, 1, 0], [0, 1, 1, 0]) == 1.0
    assert symmetric_uncertainty([3, 3, 3, 3], [0, 1, 0, 1]) == 0.0
    assert symmetric_uncertainty([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0
    with pytest.raises(LengthMismatch):
        symmetric_uncertainty([0, 1], [0, 1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 3)), min_size=1, max_size=60))
def test_symmetric_uncertainty_properties(pairs):
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    su = symmetric_uncertainty(x, y)
    assert 0.0 <= su <= 1.0
    assert su == pytest.approx(symmetric_uncertainty(y, x), abs=1e-12)
    assert su == pytest.approx(su_reference(x, y), abs=1e-12)


def test_merit_examples():
    assert cfs_merit([0], corr_table([0.7], [[1.0]])) == pytest.approx(0.7)
    two = corr_table([0.8, 0.8], [[1.0, 0.5], [0.5, 1.0]])
    assert cfs_merit(["f0", "f1"], two) == pytest.approx(1.6 / math.sqrt(3), abs=1e-12)
    assert round(cfs_merit([0, 1], two), 4) == 0.9238
    zero = corr_table([0.0, 0.0], [[1.0, 0.3], [0.3, 1.0]])
    assert cfs_merit([0, 1], zero) == 0.0
    with pytest.raises(EmptySubset):
        cfs_merit([], two)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_merit_permutation_invariant_and_redundancy_penalty(seed):
    rng = np.random.default_rng(seed)
    p = 6
    r_ff = rng.uniform(0, 1, (p, p))
    r_ff = (r_ff + r_ff.T) / 2
    np.fill_diagonal(r_ff, 1.0)
    r_cf = rng.uniform(0.05, 1, p)
    r_cf[-1] = 0.0
    corr = corr_table(r_cf, r_ff)
    subset = list(rng.permutation(p - 1)[: rng.integers(1, p)])
    perm = list(rng.permutation(subset))
    assert cfs_merit(subset, corr) == pytest.approx(cfs_merit(perm, corr), abs=1e-12)
    assert cfs_merit(subset + [p - 1], corr) < cfs_merit(subset, corr)


def test_dominant_feature_selected_alone():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 200)
    X = np.column_stack([rng.normal(size=200), y.astype(float), rng.normal(size=200)])
    data = Dataset(X, y, ("a", "b", "c"))
    assert best_first_select(data).features == ("b",)


def test_exhaustive_examples():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 50)
    one = Dataset(rng.normal(size=(50, 1)), y, ("only",))
    assert exhaustive_select(one).features == ("only",)
    copies = Dataset(np.column_stack([y, y]).astype(float), y, ("c1", "c2"))
    result = exhaustive_select(copies)
    assert result.features == ("c1",) and result.merit == pytest.approx(1.0)
    with pytest.raises(TooManyFeatures):
        exhaustive_select(Dataset(rng.normal(size=(50, 17)), y,
                                  tuple(f"x{i}" for i in range(17))))


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_matches_reference_optimum(seed):
    X, y = random_cfs_data(np.random.default_rng(seed), n_rows=80, n_features=8)
    names = tuple(f"x{i}" for i in range(8))
    got = exhaustive_select(Dataset(X, y, names))
    assert got.merit == pytest.approx(best_merit_reference(X, y), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_best_first_never_beats_exhaustive(seed):
    X, y = random_cfs_data(np.random.default_rng(100 + seed))
    data = Dataset(X, y, tuple(f"x{i}" for i in range(X.shape[1])))
    corr = CorrelationTable.from_data(data.X, data.y, data.feature_names)
    assert best_first_select(corr).merit <= exhaustive_select(corr).merit + 1e-12


def test_selection_on_synthetic_level(pipeline):
    data = pipeline.level(1838)
    subset = best_first_select(data)
    assert set(subset.features) == {"Ahy", "Mhy", "Vh2"}
    assert not {"Ghx", "Ghy", "Ghz"} & set(subset.features)


def test_subset_text_round_trip():
    s = FeatureSubset(("Ahy", "Mhy", "Vh2"), 0.5968123456789)
    assert FeatureSubset.from_text(s.to_text()) == s


def test_selector_estimator():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 150)
    X = np.column_stack([rng.normal(size=150), y + 0.1 * rng.normal(size=150)])
    sel = CfsSelector().fit(X, y)
    assert sel.get_support().tolist() == [False, True]
    assert sel.transform(X).shape == (150, 1)
    assert sel.get_params() == {"n_bins": 10, "stall_limit": 5, "exhaustive": False}
