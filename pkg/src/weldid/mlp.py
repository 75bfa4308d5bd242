"""One-hidden-layer sigmoid perceptron trained by backpropagation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ArityMismatch, ConfigError, DataError, EmptyClass
from .ingest import NEGATIVE, POSITIVE

FORMAT_TAG = "weldid-mlp"
FORMAT_VERSION = 1
N_CLASSES = 2
LOSSES = ("squared", "cross_entropy")


def default_hidden(n_in: int) -> int:
    return math.ceil((n_in + N_CLASSES) / 2)


@dataclass(eq=False)
class MlpModel:
    """Weights are stored input-major: ``W1`` is ``n_in x n_hidden`` and
    ``W2`` is ``n_hidden x 2``. Output unit 0 scores S, unit 1 scores N."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    hyper: dict = field(default_factory=dict)

    @property
    def layer_sizes(self) -> tuple[int, int, int]:
        return (self.W1.shape[0], self.W1.shape[1], self.W2.shape[1])

    def copy(self) -> "MlpModel":
        return MlpModel(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(),
                        self.x_min.copy(), self.x_max.copy(), dict(self.hyper))

    def normalize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        span = self.x_max - self.x_min
        safe = np.where(span > 0, span, 1.0)
        Z = np.where(span > 0, (X - self.x_min) / safe, 0.0)
        return np.clip(Z, 0.0, 1.0)

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def to_text(self) -> str:
        fmt = lambda a: ",".join(repr(float(v)) for v in np.ravel(a))
        n_in, n_hidden, n_out = self.layer_sizes
        lines = [f"{FORMAT_TAG} {FORMAT_VERSION}",
                 f"layers = {n_in},{n_hidden},{n_out}"]
        for key in sorted(self.hyper):
            lines.append(f"hyper.{key} = {self.hyper[key]!r}")
        lines += [f"x_min = {fmt(self.x_min)}", f"x_max = {fmt(self.x_max)}",
                  f"b1 = {fmt(self.b1)}", f"b2 = {fmt(self.b2)}"]
        lines += [f"W1 = {fmt(row)}" for row in self.W1]
        lines += [f"W2 = {fmt(row)}" for row in self.W2]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MlpModel":
        import ast

        lines = text.splitlines()
        tag = lines[0].split()
        if len(tag) != 2 or tag[0] != FORMAT_TAG or int(tag[1]) != FORMAT_VERSION:
            raise DataError(f"not a {FORMAT_TAG} v{FORMAT_VERSION} model")
        vec = lambda s: np.array([float(v) for v in s.split(",") if v], dtype=float)
        fields, hyper, W1, W2 = {}, {}, [], []
        for line in lines[1:]:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "W1":
                W1.append(vec(value))
            elif key == "W2":
                W2.append(vec(value))
            elif key.startswith("hyper."):
                hyper[key[6:]] = ast.literal_eval(value)
            elif key:
                fields[key] = value
        n_in, n_hidden, n_out = (int(v) for v in fields["layers"].split(","))
        model = cls(np.array(W1).reshape(n_in, n_hidden), vec(fields["b1"]),
                    np.array(W2).reshape(n_hidden, n_out), vec(fields["b2"]),
                    vec(fields["x_min"]), vec(fields["x_max"]), hyper)
        if model.b1.size != n_hidden or model.b2.size != n_out or model.x_min.size != n_in:
            raise DataError("model parameter shapes do not match layer sizes")
        return model


def init_network(n_in: int, n_hidden: int | None = None, seed: int = 0) -> MlpModel:
    """Uniform [-0.5, 0.5] weights, zero biases, identity input scaling."""
    if n_hidden is None:
        n_hidden = default_hidden(n_in)
    if n_in < 1 or n_hidden < 1:
        raise ConfigError("layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    W1 = rng.uniform(-0.5, 0.5, size=(n_in, n_hidden))
    W2 = rng.uniform(-0.5, 0.5, size=(n_hidden, N_CLASSES))
    return MlpModel(W1, np.zeros(n_hidden), W2, np.zeros(N_CLASSES),
                    np.zeros(n_in), np.ones(n_in), {"seed": seed})


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _forward_normalized(model, Z):
    H = _sigmoid(Z @ model.W1 + model.b1)
    return _sigmoid(H @ model.W2 + model.b2)


def forward(model: MlpModel, x) -> np.ndarray:
    """Class scores ``(score_S, score_N)``; a 2-D input gives one row per record."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.layer_sizes[0]:
        raise ArityMismatch(None, model.layer_sizes[0], x.shape[-1])
    return _forward_normalized(model, model.normalize(x))


def predict_mlp(model: MlpModel, x):
    """``(label, score_S)`` for one record; a tie goes to N."""
    s = forward(model, np.asarray(x, dtype=float).ravel())
    return (POSITIVE if s[0] > s[1] else NEGATIVE), float(s[0])


# -- backpropagation -----------------------------------------------------------

@njit(cache=True)
def _sample_grad(x, t, W1, b1, W2, b2, cross_entropy, gW1, gb1, gW2, gb2):
    """Gradients of one sample's loss, written into the g* buffers.

    Squared loss is ``0.5 * sum((o - t)^2)``; cross-entropy is the summed
    binary log-loss of the two sigmoid outputs. Returns the loss.
    """
    n_in, n_hidden = W1.shape
    n_out = W2.shape[1]
    h = np.empty(n_hidden)
    for k in range(n_hidden):
        z = b1[k]
        for i in range(n_in):
            z += x[i] * W1[i, k]
        h[k] = 1.0 / (1.0 + np.exp(-z))
    loss = 0.0
    for m in range(n_out):
        z = b2[m]
        for k in range(n_hidden):
            z += h[k] * W2[k, m]
        o = 1.0 / (1.0 + np.exp(-z))
        if cross_entropy:
            oc = min(max(o, 1e-15), 1.0 - 1e-15)
            loss -= t[m] * np.log(oc) + (1.0 - t[m]) * np.log(1.0 - oc)
            gb2[m] = o - t[m]
        else:
            loss += 0.5 * (o - t[m]) ** 2
            gb2[m] = (o - t[m]) * o * (1.0 - o)
    for k in range(n_hidden):
        back = 0.0
        for m in range(n_out):
            gW2[k, m] = h[k] * gb2[m]
            back += W2[k, m] * gb2[m]
        gb1[k] = back * h[k] * (1.0 - h[k])
        for i in range(n_in):
            gW1[i, k] = x[i] * gb1[k]
    return loss


@njit(cache=True)
def _train_online(Z, T, W1, b1, W2, b2, lr, momentum, orders, cross_entropy):
    n_in, n_hidden = W1.shape
    n_out = W2.shape[1]
    gW1 = np.zeros_like(W1)
    gb1 = np.zeros_like(b1)
    gW2 = np.zeros_like(W2)
    gb2 = np.zeros_like(b2)
    dW1 = np.zeros_like(W1)
    db1 = np.zeros_like(b1)
    dW2 = np.zeros_like(W2)
    db2 = np.zeros_like(b2)
    n_epochs, n = orders.shape
    trace = np.empty(n_epochs)
    for e in range(n_epochs):
        total = 0.0
        for r in range(n):
            s = orders[e, r]
            total += _sample_grad(Z[s], T[s], W1, b1, W2, b2, cross_entropy,
                                  gW1, gb1, gW2, gb2)
            for k in range(n_hidden):
                for i in range(n_in):
                    dW1[i, k] = -lr * gW1[i, k] + momentum * dW1[i, k]
                    W1[i, k] += dW1[i, k]
                db1[k] = -lr * gb1[k] + momentum * db1[k]
                b1[k] += db1[k]
                for m in range(n_out):
                    dW2[k, m] = -lr * gW2[k, m] + momentum * dW2[k, m]
                    W2[k, m] += dW2[k, m]
            for m in range(n_out):
                db2[m] = -lr * gb2[m] + momentum * db2[m]
                b2[m] += db2[m]
        trace[e] = total / n
    return trace


@njit(cache=True)
def _batch_grad(Z, T, W1, b1, W2, b2, cross_entropy):
    gW1 = np.zeros_like(W1)
    gb1 = np.zeros_like(b1)
    gW2 = np.zeros_like(W2)
    gb2 = np.zeros_like(b2)
    sW1 = np.zeros_like(W1)
    sb1 = np.zeros_like(b1)
    sW2 = np.zeros_like(W2)
    sb2 = np.zeros_like(b2)
    n = Z.shape[0]
    loss = 0.0
    for s in range(n):
        loss += _sample_grad(Z[s], T[s], W1, b1, W2, b2, cross_entropy,
                             gW1, gb1, gW2, gb2)
        sW1 += gW1
        sb1 += gb1
        sW2 += gW2
        sb2 += gb2
    return loss / n, sW1 / n, sb1 / n, sW2 / n, sb2 / n


def _targets(y) -> np.ndarray:
    y = np.asarray(y).ravel()
    pos = (y == POSITIVE) if y.dtype.kind in "OUS" else (y > 0)
    return np.column_stack([pos, ~pos]).astype(float)


def batch_loss_and_grad(model: MlpModel, X, y, loss: str = "squared"):
    """Mean loss and mean analytic gradients ``[W1, b1, W2, b2]``."""
    Z = model.normalize(X)
    out = _batch_grad(Z, _targets(y), model.W1, model.b1, model.W2, model.b2,
                      loss == "cross_entropy")
    return out[0], list(out[1:])


def mean_loss(model: MlpModel, X, y, loss: str = "squared") -> float:
    """Mean per-sample loss by plain forward evaluation (no backprop code)."""
    O = forward(model, X)
    T = _targets(y)
    if loss == "cross_entropy":
        O = np.clip(O, 1e-15, 1 - 1e-15)
        return float(np.mean(-np.sum(T * np.log(O) + (1 - T) * np.log(1 - O), axis=1)))
    return float(np.mean(0.5 * np.sum((O - T) ** 2, axis=1)))


def gradient_check(model: MlpModel, dataset, h: float = 1e-5, loss: str = "squared",
                   floor: float = 1e-7) -> float:
    """Max relative gap between backprop and central finite differences.

    The relative error is ``|a - n| / max(|a|, |n|, floor)`` so that entries
    whose true gradient is zero are judged on an absolute scale.
    """
    if h <= 0:
        raise ConfigError("h must be positive")
    X, y = np.asarray(dataset.X, dtype=float), dataset.y
    _, grads = batch_loss_and_grad(model, X, y, loss)
    probe = model.copy()
    worst = 0.0
    for param, grad in zip(probe.params(), grads):
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = mean_loss(probe, X, y, loss)
            flat[i] = keep - h
            down = mean_loss(probe, X, y, loss)
            flat[i] = keep
            num = (up - down) / (2 * h)
            err = abs(gflat[i] - num) / max(abs(gflat[i]), abs(num), floor)
            worst = max(worst, err)
    return worst


@dataclass(frozen=True)
class TrainTrace:
    loss: np.ndarray

    def __len__(self):
        return self.loss.size


def train_mlp(dataset, y=None, lr: float = 0.3, momentum: float = 0.2, epochs: int = 500,
              n_hidden: int | None = None, seed: int = 0, loss: str = "squared",
              batch: str = "online"):
    """Backpropagation with momentum on one-hot targets (S = unit 0).

    ``batch="online"`` updates after every record, visiting records in a
    seeded shuffled order each epoch; ``batch="full"`` takes one step per
    epoch on the mean gradient. Inputs are min-max scaled to [0, 1] with
    statistics from the training data. Returns ``(model, trace)``.
    """
    if loss not in LOSSES:
        raise ConfigError(f"loss must be one of {LOSSES}")
    if batch not in ("online", "full"):
        raise ConfigError("batch must be 'online' or 'full'")
    if epochs < 0:
        raise ConfigError("epochs must be >= 0")
    if y is None:
        X, y = np.asarray(dataset.X, dtype=float), dataset.y
    else:
        X = np.asarray(dataset, dtype=float)
    T = _targets(y)
    if not T[:, 0].any() or not T[:, 1].any():
        raise EmptyClass("training data must contain both classes")
    model = init_network(X.shape[1], n_hidden, seed)
    model.x_min = X.min(axis=0)
    model.x_max = X.max(axis=0)
    model.hyper = {"lr": lr, "momentum": momentum, "epochs": epochs,
                   "seed": seed, "loss": loss, "batch": batch}
    Z = model.normalize(X)
    ce = loss == "cross_entropy"
    if epochs == 0:
        return model, TrainTrace(np.zeros(0))
    if batch == "online":
        rng = np.random.default_rng([seed, 1])
        orders = np.stack([rng.permutation(len(Z)) for _ in range(epochs)])
        trace = _train_online(Z, T, model.W1, model.b1, model.W2, model.b2,
                              lr, momentum, orders, ce)
    else:
        trace = np.empty(epochs)
        deltas = [np.zeros_like(p) for p in model.params()]
        for e in range(epochs):
            out = _batch_grad(Z, T, model.W1, model.b1, model.W2, model.b2, ce)
            trace[e] = out[0]
            for p, d, g in zip(model.params(), deltas, out[1:]):
                d *= momentum
                d -= lr * g
                p += d
    return model, TrainTrace(trace)


class MLPWeldClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn classifier around :func:`train_mlp`.

    ``decision_function`` returns the weld score (output of the S unit). The
    second entry of ``classes_`` is the positive class.
    """

    def __init__(self, hidden_units=None, learning_rate=0.3, momentum=0.2, epochs=500,
                 loss="squared", batch="online", random_state=0):
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.loss = loss
        self.batch = batch
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise EmptyClass(f"expected 2 classes, got {self.classes_.size}")
        self.n_features_in_ = X.shape[1]
        self.model_, self.trace_ = train_mlp(
            X, (y == self.classes_[1]).astype(int), self.learning_rate, self.momentum,
            self.epochs, self.hidden_units, self.random_state, self.loss, self.batch)
        return self

    @classmethod
    def from_model(cls, model: MlpModel) -> "MLPWeldClassifier":
        """Wrap a trained model; classes become ``[0, 1]``."""
        est = cls()
        est.model_ = model
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = model.layer_sizes[0]
        return est

    def _scores(self, X):
        check_is_fitted(self, "model_")
        return forward(self.model_, check_array(X))

    def decision_function(self, X):
        return self._scores(X)[:, 0]

    def predict(self, X):
        s = self._scores(X)
        return np.where(s[:, 0] > s[:, 1], self.classes_[1], self.classes_[0])
