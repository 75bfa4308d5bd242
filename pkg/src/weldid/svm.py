"""Soft-margin SVM with the Pearson VII universal kernel (PUK), trained by SMO."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ArityMismatch, ConfigError, DataError, EmptyClass, NoConvergence
from .ingest import NEGATIVE, POSITIVE

FORMAT_TAG = "weldid-svm"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class PukParams:
    omega: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.omega > 0 and self.sigma > 0):
            raise ConfigError("PUK omega and sigma must be positive")

    @property
    def _scale(self) -> float:
        return 2.0 * math.sqrt(2.0 ** (1.0 / self.omega) - 1.0) / self.sigma


def puk_kernel(x, y, p: PukParams = PukParams()) -> float:
    """``1 / (1 + (2 ||x-y|| sqrt(2^(1/omega) - 1) / sigma)^2)^omega``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ArityMismatch(None, x.size, y.size)
    dist = float(np.sqrt(np.sum((x - y) ** 2)))
    return 1.0 / (1.0 + (dist * p._scale) ** 2) ** p.omega


def puk_gram(A, B, p: PukParams = PukParams()) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return 1.0 / (1.0 + sq * p._scale ** 2) ** p.omega


def standardize(X):
    """Z-score columns; zero-variance columns become zeros.

    Returns ``(Z, (mean, std))``.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise DataError("standardization needs at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return apply_standardization(X, mean, std), (mean, std)


def apply_standardization(X, mean, std):
    X = np.asarray(X, dtype=float)
    safe = np.where(std > 0, std, 1.0)
    return np.where(std > 0, (X - mean) / safe, 0.0)


@dataclass(eq=False)
class SvmModel:
    support_vectors: np.ndarray  # standardized coordinates
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    params: PukParams
    C: float
    mean: np.ndarray
    std: np.ndarray
    support_indices: np.ndarray | None = None
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return self.mean.size

    @property
    def alpha(self) -> np.ndarray:
        return np.abs(self.dual_coef)

    def to_text(self) -> str:
        fmt = lambda a: ",".join(repr(float(v)) for v in a)
        lines = [
            f"{FORMAT_TAG} {FORMAT_VERSION}",
            f"C = {float(self.C)!r}",
            f"omega = {float(self.params.omega)!r}",
            f"sigma = {float(self.params.sigma)!r}",
            f"bias = {float(self.bias)!r}",
            f"n_features = {self.n_features}",
            f"mean = {fmt(self.mean)}",
            f"std = {fmt(self.std)}",
            f"n_support = {self.dual_coef.size}",
        ]
        for c, sv in zip(self.dual_coef, self.support_vectors):
            lines.append(f"sv = {float(c)!r},{fmt(sv)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SvmModel":
        lines = text.splitlines()
        tag = lines[0].split()
        if len(tag) != 2 or tag[0] != FORMAT_TAG or int(tag[1]) != FORMAT_VERSION:
            raise DataError(f"not a {FORMAT_TAG} v{FORMAT_VERSION} model")
        fields, rows = {}, []
        for line in lines[1:]:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "sv":
                rows.append([float(v) for v in value.split(",")])
            elif key:
                fields[key] = value
        vec = lambda s: np.array([float(v) for v in s.split(",") if v], dtype=float)
        p = int(fields["n_features"])
        rows = np.array(rows, dtype=float).reshape(-1, p + 1)
        if rows.shape[0] != int(fields["n_support"]):
            raise DataError("support vector count does not match header")
        return cls(rows[:, 1:], rows[:, 0], float(fields["bias"]),
                   PukParams(float(fields["omega"]), float(fields["sigma"])),
                   float(fields["C"]), vec(fields["mean"]), vec(fields["std"]))


def _binary_targets(y):
    y = np.asarray(y).ravel()
    if y.dtype.kind in "OUS":
        t = np.where(y == POSITIVE, 1.0, -1.0)
    else:
        t = np.where(y > 0, 1.0, -1.0)
    if not (t > 0).any() or not (t < 0).any():
        raise EmptyClass("training data must contain both classes")
    return t


def _xy(dataset, y=None):
    if y is None:
        return np.asarray(dataset.X, dtype=float), dataset.y
    return np.asarray(dataset, dtype=float), y


def train_smo(dataset, y=None, C: float = 1.0, params: PukParams = PukParams(),
              tol: float = 1e-3, seed: int = 0, max_passes: int = 10_000) -> SvmModel:
    """Solve the soft-margin dual by sequential minimal optimization.

    ``dataset`` is a Dataset (``y`` omitted) or a feature matrix with labels
    ``y`` (``"S"``/``"N"`` or 1/0). Each step picks the maximal violating
    pair and solves it analytically; training stops once the KKT gap is at
    most ``tol``. ``max_passes`` caps the work at ``max_passes * n`` pair
    updates. ``seed`` permutes the visiting order, which only matters when
    candidate pairs tie.
    """
    if C <= 0 or tol <= 0:
        raise ConfigError("C and tol must be positive")
    X, y = _xy(dataset, y)
    t = _binary_targets(y)
    Z, (mean, std) = standardize(X)
    n = t.size
    order = np.random.default_rng(seed).permutation(n)
    Zp, tp = Z[order], t[order]
    K = puk_gram(Zp, Zp, params)

    alpha = np.zeros(n)
    E = -tp.copy()  # f(x_i) - y_i with f excluding bias
    snap = 1e-13 * C
    max_iter = max_passes * n
    it = 0
    while True:
        pos = tp > 0
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        score = -E
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if gap <= tol:
            # refresh accumulated error terms before accepting convergence
            E_fresh = K @ (alpha * tp) - tp
            if np.max(np.abs(E_fresh - E)) > 1e-12:
                E = E_fresh
                continue
            break
        if it >= max_iter:
            raise NoConvergence(f"SMO hit the iteration cap ({max_iter}) with gap {gap:.3g}")
        it += 1
        yi, yj = tp[i], tp[j]
        ai, aj = alpha[i], alpha[j]
        if yi != yj:
            lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
        eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        aj_new = min(hi, max(lo, aj + yj * (E[i] - E[j]) / eta))
        ai_new = ai + yi * yj * (aj - aj_new)
        if ai_new < snap:
            ai_new = 0.0
        elif ai_new > C - snap:
            ai_new = C
        alpha[i], alpha[j] = ai_new, aj_new
        E += (ai_new - ai) * yi * K[i] + (aj_new - aj) * yj * K[j]

    score = -E
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = 0.5 * (score[free].max() + score[free].min())
    else:
        pos = tp > 0
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        bias = 0.5 * (score[up].max() + score[low].min())
    sv = alpha > 0
    back = order[sv]
    srt = np.argsort(back)
    return SvmModel(Zp[sv][srt], (alpha * tp)[sv][srt], float(bias), params,
                    float(C), mean, std, back[srt], it)


def decision_function(model: SvmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ArityMismatch(None, model.n_features, X.shape[1])
    Z = apply_standardization(X, model.mean, model.std)
    return puk_gram(Z, model.support_vectors, model.params) @ model.dual_coef + model.bias


def decision_value(model: SvmModel, x) -> float:
    """Signed score for one record; positive means weld."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.n_features:
        raise ArityMismatch(None, model.n_features, x.size)
    return float(decision_function(model, x[None, :])[0])


def predict_svm(model: SvmModel, x):
    """``(label, score)``; an exact zero score is labeled N."""
    score = decision_value(model, x)
    return (POSITIVE if score > 0 else NEGATIVE), score


def kkt_report(model: SvmModel, dataset, y=None, tol: float = 1e-3) -> float:
    """Worst KKT violation of the model on its training set."""
    if model.support_indices is None:
        raise ValueError("model carries no training indices (loaded from file?)")
    X, y = _xy(dataset, y)
    t = _binary_targets(y)
    alpha = np.zeros(t.size)
    alpha[model.support_indices] = model.alpha
    margin = t * decision_function(model, X)
    at_zero = alpha == 0
    at_c = alpha >= model.C
    free = ~at_zero & ~at_c
    worst = 0.0
    if at_zero.any():
        worst = max(worst, float(np.max(1.0 - margin[at_zero])))
    if free.any():
        worst = max(worst, float(np.max(np.abs(margin[free] - 1.0))))
    if at_c.any():
        worst = max(worst, float(np.max(margin[at_c] - 1.0)))
    return max(worst, 0.0)


def dual_objective(alpha, X, t, params: PukParams = PukParams()) -> float:
    """``sum(alpha) - 0.5 * sum_ij alpha_i alpha_j t_i t_j K_ij`` (maximized)."""
    a = np.asarray(alpha, dtype=float) * np.asarray(t, dtype=float)
    return float(np.sum(np.abs(alpha)) - 0.5 * a @ puk_gram(X, X, params) @ a)


class PukSVC(ClassifierMixin, BaseEstimator):
    """Scikit-learn classifier around :func:`train_smo`.

    Labels may be strings or integers; the second entry of ``classes_``
    (``"S"`` for ``{"N", "S"}``, 1 for ``{0, 1}``) is the positive class.
    """

    def __init__(self, C=1.0, omega=1.0, sigma=1.0, tol=1e-3, random_state=0,
                 max_passes=10_000):
        self.C = C
        self.omega = omega
        self.sigma = sigma
        self.tol = tol
        self.random_state = random_state
        self.max_passes = max_passes

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise EmptyClass(f"expected 2 classes, got {self.classes_.size}")
        self.n_features_in_ = X.shape[1]
        self.model_ = train_smo(X, (y == self.classes_[1]).astype(int), self.C,
                                PukParams(self.omega, self.sigma), self.tol,
                                self.random_state, self.max_passes)
        return self

    @classmethod
    def from_model(cls, model: SvmModel) -> "PukSVC":
        """Wrap a trained model; classes become ``[0, 1]``."""
        est = cls(model.C, model.params.omega, model.params.sigma)
        est.model_ = model
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = model.n_features
        return est

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return decision_function(self.model_, check_array(X))

    def predict(self, X):
        return np.where(self.decision_function(X) > 0, self.classes_[1], self.classes_[0])
