"""Correlation-based feature subset selection (CFS).

Feature-class and feature-feature correlations are symmetric uncertainties
between equal-width discretized columns. Subsets are scored with the CFS
merit and searched best-first; :func:`exhaustive_select` is the brute-force
reference for small feature counts.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from .exceptions import EmptySubset, LengthMismatch, TooManyFeatures

# merits closer than this are treated as ties
MERIT_TIE = 1e-12


def discretize_equal_width(column, n_bins: int = 10) -> np.ndarray:
    """Bin index per value; the last bin is closed on the right."""
    x = np.asarray(column, dtype=float)
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if x.size == 0:
        raise ValueError("column is empty")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros(x.size, dtype=int)
    width = (hi - lo) / n_bins
    return np.clip(np.floor((x - lo) / width).astype(int), 0, n_bins - 1)


def _entropy(counts) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def symmetric_uncertainty(x, y) -> float:
    """``2 I(x;y) / (H(x) + H(y))`` in bits; 0 if either side is constant."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.size} vs {y.size}")
    if x.size == 0:
        raise LengthMismatch("empty input")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    joint = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(joint, (xi, yi), 1)
    hx = _entropy(joint.sum(axis=1))
    hy = _entropy(joint.sum(axis=0))
    if hx == 0.0 or hy == 0.0:
        return 0.0
    mutual = hx + hy - _entropy(joint.ravel())
    return float(min(1.0, max(0.0, 2.0 * mutual / (hx + hy))))


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    r_cf: np.ndarray
    r_ff: np.ndarray
    feature_names: tuple[str, ...]

    @classmethod
    def from_data(cls, X, y, feature_names=None, n_bins: int = 10):
        X = np.asarray(X, dtype=float)
        n_features = X.shape[1]
        if feature_names is None:
            feature_names = tuple(f"x{i}" for i in range(n_features))
        binned = [discretize_equal_width(X[:, j], n_bins) for j in range(n_features)]
        r_cf = np.array([symmetric_uncertainty(b, y) for b in binned])
        r_ff = np.eye(n_features)
        for i, j in itertools.combinations(range(n_features), 2):
            r_ff[i, j] = r_ff[j, i] = symmetric_uncertainty(binned[i], binned[j])
        return cls(r_cf, r_ff, tuple(feature_names))

    def index(self, names) -> list[int]:
        return [self.feature_names.index(n) for n in names]


def cfs_merit(subset, corr: CorrelationTable) -> float:
    """``k * mean(r_cf) / sqrt(k + k (k-1) mean(r_ff))`` over the subset.

    ``subset`` holds feature names or integer column indices.
    """
    idx = [i if isinstance(i, (int, np.integer)) else corr.feature_names.index(i)
           for i in subset]
    k = len(idx)
    if k == 0:
        raise EmptySubset("merit of an empty subset is undefined")
    return _merit(np.asarray(idx), corr)


def _merit(idx, corr) -> float:
    k = idx.size
    rcf = corr.r_cf[idx].mean()
    if k == 1:
        return float(rcf)
    block = corr.r_ff[np.ix_(idx, idx)]
    rff = (block.sum() - np.trace(block)) / (k * (k - 1))
    return float(k * rcf / math.sqrt(k + k * (k - 1) * rff))


@dataclass(frozen=True)
class FeatureSubset:
    features: tuple[str, ...]
    merit: float

    def to_text(self) -> str:
        return f"features = {','.join(self.features)}\nmerit = {self.merit!r}\n"

    @classmethod
    def from_text(cls, text: str) -> "FeatureSubset":
        fields = {}
        for line in text.splitlines():
            if "=" in line and not line.lstrip().startswith("#"):
                key, _, value = line.partition("=")
                fields[key.strip()] = value.strip()
        feats = tuple(f for f in fields["features"].split(",") if f)
        return cls(feats, float(fields["merit"]))


def _better(a, b) -> bool:
    """Is candidate ``a`` = (merit, indices) preferred over ``b``?"""
    if b is None:
        return True
    if a[0] > b[0] + MERIT_TIE:
        return True
    if a[0] < b[0] - MERIT_TIE:
        return False
    return (len(a[1]), a[1]) < (len(b[1]), b[1])


def _as_corr(data, n_bins):
    if isinstance(data, CorrelationTable):
        return data
    return CorrelationTable.from_data(data.X, data.y, data.feature_names, n_bins)


def best_first_select(dataset, n_bins: int = 10, stall_limit: int = 5) -> FeatureSubset:
    """Forward best-first search from the empty set.

    The open list is ordered by merit; each expansion adds one feature to the
    best open subset. The search stops after ``stall_limit`` consecutive
    expansions that fail to improve the best merit. Ties prefer smaller
    subsets, then the lexicographically smaller tuple of column positions.

    ``dataset`` is a :class:`~weldid.preprocess.Dataset` or a precomputed
    :class:`CorrelationTable`.
    """
    corr = _as_corr(dataset, n_bins)
    n = len(corr.feature_names)
    best = None
    visited = {()}
    # heap entries: (-merit, size, indices)
    open_list = [(0.0, 0, ())]
    stall = 0
    while open_list and stall < stall_limit:
        _, _, node = heapq.heappop(open_list)
        improved = False
        for f in range(n):
            if f in node:
                continue
            child = tuple(sorted(node + (f,)))
            if child in visited:
                continue
            visited.add(child)
            merit = _merit(np.array(child), corr)
            heapq.heappush(open_list, (-merit, len(child), child))
            cand = (merit, child)
            if _better(cand, best):
                if best is None or merit > best[0] + MERIT_TIE:
                    improved = True
                best = cand
        stall = 0 if improved else stall + 1
    if best is None:
        raise EmptySubset("no features to select from")
    return FeatureSubset(tuple(corr.feature_names[i] for i in best[1]), best[0])


def exhaustive_select(dataset, n_bins: int = 10) -> FeatureSubset:
    """Global merit maximizer over every non-empty subset (at most 16 features)."""
    corr = _as_corr(dataset, n_bins)
    n = len(corr.feature_names)
    if n > 16:
        raise TooManyFeatures(f"{n} features; exhaustive search is capped at 16")
    best = None
    for k in range(1, n + 1):
        for combo in itertools.combinations(range(n), k):
            cand = (_merit(np.array(combo), corr), combo)
            if _better(cand, best):
                best = cand
    if best is None:
        raise EmptySubset("no features to select from")
    return FeatureSubset(tuple(corr.feature_names[i] for i in best[1]), best[0])


class CfsSelector(SelectorMixin, BaseEstimator):
    """Scikit-learn transformer keeping the CFS-selected columns.

    Parameters
    ----------
    n_bins : int
        Equal-width bins per feature.
    stall_limit : int
        Non-improving expansions tolerated by the best-first search.
    exhaustive : bool
        Use exhaustive search instead (16 features at most).
    """

    def __init__(self, n_bins=10, stall_limit=5, exhaustive=False):
        self.n_bins = n_bins
        self.stall_limit = stall_limit
        self.exhaustive = exhaustive

    def fit(self, X, y):
        names = getattr(X, "columns", None)
        X, y = check_X_y(X, y)
        names = tuple(str(c) for c in names) if names is not None else \
            tuple(f"x{i}" for i in range(X.shape[1]))
        self.n_features_in_ = X.shape[1]
        self.correlations_ = CorrelationTable.from_data(X, y, names, self.n_bins)
        if self.exhaustive:
            self.subset_ = exhaustive_select(self.correlations_)
        else:
            self.subset_ = best_first_select(self.correlations_,
                                             stall_limit=self.stall_limit)
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "subset_")
        chosen = set(self.subset_.features)
        return np.array([n in chosen for n in self.correlations_.feature_names])
