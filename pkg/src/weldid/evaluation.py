"""Cross-validation, hold-out testing, error rates and ROC analysis."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from .exceptions import ClassTooSmall, ConfigError, EmptyMatrix, OneClassOnly, UndefinedRate


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[np.ndarray, ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def train_test(self, f: int):
        train = np.sort(np.concatenate([self.folds[g] for g in range(self.k) if g != f]))
        return train, self.folds[f]


def stratified_kfold(y, k: int = 10, seed: int = 0) -> FoldPlan:
    """Shuffle each class with a seeded RNG and deal its rows round-robin."""
    y = np.asarray(getattr(y, "y", y)).ravel()
    if k < 2:
        raise ConfigError("k must be >= 2")
    buckets = [[] for _ in range(k)]
    rng = np.random.default_rng(seed)
    for cls in np.unique(y):
        rows = np.flatnonzero(y == cls)
        if rows.size < k:
            raise ClassTooSmall(f"class {cls!r} has {rows.size} rows, fewer than k={k}")
        rows = rng.permutation(rows)
        for pos, row in enumerate(rows):
            buckets[pos % k].append(row)
    return FoldPlan(tuple(np.sort(np.array(b, dtype=int)) for b in buckets), seed)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with S (weld) as the positive class."""

    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def __add__(self, other):
        return ConfusionMatrix(self.tp + other.tp, self.fn + other.fn,
                               self.fp + other.fp, self.tn + other.tn)

    @classmethod
    def from_predictions(cls, truth, predicted):
        t = np.asarray(truth).astype(bool)
        p = np.asarray(predicted).astype(bool)
        return cls(int(np.sum(t & p)), int(np.sum(t & ~p)),
                   int(np.sum(~t & p)), int(np.sum(~t & ~p)))


def error_rate(cm: ConfusionMatrix, decimals: int | None = 2) -> float:
    """Percentage of misclassified instances."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    value = 100.0 * (cm.fp + cm.fn) / cm.total
    return round(value, decimals) if decimals is not None else value


def accuracy(cm: ConfusionMatrix, decimals: int | None = 2) -> float:
    if decimals is None:
        return 100.0 - error_rate(cm, None)
    return round(100.0 - error_rate(cm, decimals), decimals)


def tpr_spc(cm: ConfusionMatrix, decimals: int | None = 1) -> tuple[float, float]:
    """Sensitivity and specificity in percent."""
    if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
        raise UndefinedRate("both classes must be present to define TPR and SPC")
    tpr = 100.0 * cm.tp / (cm.tp + cm.fn)
    spc = 100.0 * cm.tn / (cm.tn + cm.fp)
    if decimals is None:
        return tpr, spc
    return round(tpr, decimals), round(spc, decimals)


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_text(self) -> str:
        lines = ["# fpr tpr"]
        lines += [f"{f!r} {t!r}" for f, t in zip(self.fpr.tolist(), self.tpr.tolist())]
        return "\n".join(lines) + "\n"


def roc_curve(scores, truth) -> RocCurve:
    """Sweep thresholds over the distinct scores, highest first.

    Tied scores move the curve diagonally, so the trapezoid AUC counts a
    tied positive/negative pair as one half.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(truth).astype(bool)
    n_pos, n_neg = int(t.sum()), int((~t).sum())
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(t)[last]
    fp = np.cumsum(~t)[last]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return RocCurve(fpr, tpr, np.r_[np.inf, s[last]], auc)


def _scores(model, X):
    if hasattr(model, "decision_function"):
        return np.asarray(model.decision_function(X), dtype=float)
    return np.asarray(model.predict(X), dtype=float)


@dataclass
class Predictions:
    """Pooled out-of-sample predictions (row indices into the evaluated set)."""

    rows: np.ndarray
    truth: np.ndarray
    predicted: np.ndarray
    scores: np.ndarray

    @property
    def confusion(self) -> ConfusionMatrix:
        return ConfusionMatrix.from_predictions(self.truth, self.predicted)

    def roc(self) -> RocCurve:
        return roc_curve(self.scores, self.truth)


def cross_validate(dataset, trainer, k: int = 10, seed: int = 0):
    """Pooled stratified k-fold CV of an unfitted scikit-learn estimator.

    The estimator is cloned and fitted on ``X``/``y`` with ``y`` in {0, 1}
    (1 = S). Returns ``(confusion_matrix, predictions)``.
    """
    plan = stratified_kfold(dataset.y, k, seed)
    rows, pred, scores = [], [], []
    for f in range(plan.k):
        train, test = plan.train_test(f)
        model = clone(trainer).fit(dataset.X[train], dataset.y[train])
        rows.append(test)
        pred.append(np.asarray(model.predict(dataset.X[test])).astype(int))
        scores.append(_scores(model, dataset.X[test]))
    rows = np.concatenate(rows)
    order = np.argsort(rows)
    out = Predictions(rows[order], dataset.y[rows][order],
                      np.concatenate(pred)[order], np.concatenate(scores)[order])
    return out.confusion, out


def evaluate_holdout(model, dataset) -> Predictions:
    """Predictions of an already fitted estimator on ``dataset``."""
    pred = np.asarray(model.predict(dataset.X)).astype(int)
    return Predictions(np.arange(len(dataset)), dataset.y, pred, _scores(model, dataset.X))


# -- experiment grid -----------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    level: str
    classifier: str
    features: str
    mode: str  # "cv" or "independent"
    feature_names: tuple[str, ...]
    confusion: ConfusionMatrix
    roc: RocCurve
    seed: int
    params: dict = field(default_factory=dict)

    @property
    def error_rate(self) -> float:
        return error_rate(self.confusion)

    @property
    def tpr_spc(self) -> tuple[float, float]:
        return tpr_spc(self.confusion)

    @property
    def key(self):
        return (self.level, self.classifier, self.features, self.mode)


@dataclass
class EvalReport:
    cells: list[CellResult] = field(default_factory=list)
    k: int = 10
    test_size: int = 0

    def __getitem__(self, key) -> CellResult:
        for c in self.cells:
            if c.key == tuple(key):
                return c
        raise KeyError(key)

    def levels(self):
        seen = []
        for c in self.cells:
            if c.level not in seen:
                seen.append(c.level)
        return seen

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["level", "classifier", "features", "mode", "selected", "tp", "fn",
                    "fp", "tn", "error_rate", "tpr", "spc", "auc", "seed"])
        for c in self.cells:
            tpr, spc = c.tpr_spc
            w.writerow([c.level, c.classifier, c.features, c.mode,
                        " ".join(c.feature_names), c.confusion.tp, c.confusion.fn,
                        c.confusion.fp, c.confusion.tn, f"{c.error_rate:.2f}",
                        f"{tpr:.1f}", f"{spc:.1f}", repr(c.roc.auc), c.seed])
        return out.getvalue()

    def to_text(self) -> str:
        """Aligned error-rate and TPR/SPC tables, one pair per level."""
        names = {"mlp": "Neural network (MLP)", "svm": "SVM (PUK kernel)"}
        modes = [("cv", f"CV {self.k} folds"), ("independent", f"Test {self.test_size}")]
        blocks = []
        for level in self.levels():
            cells = [c for c in self.cells if c.level == level]
            preps = []
            for c in cells:
                label = "None" if c.features == "all" else \
                    "Selected (" + ", ".join(c.feature_names) + ")"
                if (c.features, label) not in preps:
                    preps.append((c.features, label))
            width = max([len(p[1]) for p in preps] + [24])
            clf = [k for k in ("mlp", "svm") if any(c.classifier == k for c in cells)]
            lines = [f"Error rate (%), level {level}"]
            head = "Pre-processing".ljust(width)
            for k in clf:
                head += " | " + names[k].center(25)
            lines.append(head)
            sub = " " * width
            for _ in clf:
                sub += " | " + "".join(m[1].rjust(12) for m in modes) + " "
            lines.append(sub)
            for feat, label in preps:
                row = label.ljust(width)
                for k in clf:
                    row += " | "
                    for mode, _ in modes:
                        try:
                            row += f"{self[(level, k, feat, mode)].error_rate:12.2f}"
                        except KeyError:
                            row += "-".rjust(12)
                    row += " "
                lines.append(row)
            lines.append("")
            lines.append(f"ROC analysis (TPR% / SPC%), level {level}")
            lines.append(head)
            lines.append(sub)
            for feat, label in preps:
                row = label.ljust(width)
                for k in clf:
                    row += " | "
                    for mode, _ in modes:
                        try:
                            tpr, spc = self[(level, k, feat, mode)].tpr_spc
                            row += f"{tpr:5.1f}/{spc:5.1f}".rjust(12)
                        except KeyError:
                            row += "-".rjust(12)
                    row += " "
                lines.append(row)
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"


@dataclass(frozen=True)
class CellConfig:
    classifier: str  # "mlp" or "svm"
    features: str  # "all" or "selected"


DEFAULT_CONFIGS = tuple(CellConfig(c, f) for c in ("mlp", "svm") for f in ("all", "selected"))


def make_estimator(classifier: str, params: dict | None = None, seed: int = 0):
    from .mlp import MLPWeldClassifier
    from .svm import PukSVC

    params = dict(params or {})
    if classifier == "mlp":
        return MLPWeldClassifier(random_state=seed, **params)
    if classifier == "svm":
        return PukSVC(random_state=seed, **params)
    raise ConfigError(f"unknown classifier {classifier!r}")


def experiment_grid(levels, test, configs=DEFAULT_CONFIGS, k: int = 10, seed: int = 0,
                    params: dict | None = None, cfs: dict | None = None,
                    selections: dict | None = None) -> EvalReport:
    """Fill the (classifier x features x mode) grid for every level.

    ``levels`` is a sequence of Dataset objects (their ``level`` attribute
    names the row), ``test`` the independent Dataset. Selected-feature cells
    run CFS on the level's training data, unless ``selections`` maps the
    level name to a precomputed FeatureSubset, and restrict both training
    and testing to those columns. ``params`` maps classifier name to
    estimator keyword arguments.
    """
    from .feature_select import best_first_select

    params = params or {}
    cfs = cfs or {}
    selections = dict(selections or {})
    report = EvalReport(k=k, test_size=len(test))
    for data in levels:
        name = str(data.level)
        for cfg in configs:
            if cfg.features == "selected":
                if name not in selections:
                    selections[name] = best_first_select(data, **cfs)
                feats = selections[name].features
            elif cfg.features == "all":
                feats = data.feature_names
            else:
                raise ConfigError(f"unknown feature mode {cfg.features!r}")
            train = data.select(feats)
            hold = test.select(feats)
            est = make_estimator(cfg.classifier, params.get(cfg.classifier), seed)
            cm, pred = cross_validate(train, est, k, seed)
            report.cells.append(CellResult(name, cfg.classifier, cfg.features, "cv",
                                           tuple(feats), cm, pred.roc(), seed,
                                           est.get_params()))
            fitted = clone(est).fit(train.X, train.y)
            pred = evaluate_holdout(fitted, hold)
            report.cells.append(CellResult(name, cfg.classifier, cfg.features,
                                           "independent", tuple(feats), pred.confusion,
                                           pred.roc(), seed, est.get_params()))
    return report
