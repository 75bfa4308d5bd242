import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mlp_draw
from oracles import sigmoid
from weldid.exceptions import ArityMismatch, ConfigError, EmptyClass
from weldid.mlp import (
    MLPWeldClassifier,
    MlpModel,
    forward,
    gradient_check,
    init_network,
    mean_loss,
    predict_mlp,
    train_mlp,
)
from weldid.preprocess import Dataset

# two clusters split by x0 + x1 = 1
TOY_X = np.array([[0.0, 0.1], [0.2, 0.3], [0.1, 0.6], [0.4, 0.2],
                  [0.9, 0.8], [0.7, 1.0], [1.0, 0.5], [0.8, 0.6]])
TOY_Y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
TOY = Dataset(TOY_X, TOY_Y, ("x0", "x1"))


def test_init_examples():
    a, b = init_network(3, 2, seed=7), init_network(3, 2, seed=7)
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
    one = init_network(1, 1)
    assert one.W1.shape == (1, 1) and one.W2.shape == (1, 2)
    big = init_network(12)
    assert big.W1.shape == (12, 7) and big.W2.shape == (7, 2)
    assert np.all(np.abs(big.W1) <= 0.5) and not big.b1.any()
    with pytest.raises(ConfigError):
        init_network(0, 2)


def test_forward_zero_weights():
    model = init_network(2, 3)
    for p in model.params():
        p[...] = 0.0
    assert forward(model, [0.3, 0.9]).tolist() == [0.5, 0.5]
    assert predict_mlp(model, [0.3, 0.9]) == ("N", 0.5)


def test_forward_hand_built_net():
    model = MlpModel(np.array([[2.0]]), np.array([-0.5]), np.array([[1.5, -3.0]]),
                     np.array([0.25, 0.75]), np.array([10.0]), np.array([20.0]))
    x = 14.0
    z = (x - 10.0) / 10.0
    h = sigmoid(2.0 * z - 0.5)
    expected = [sigmoid(1.5 * h + 0.25), sigmoid(-3.0 * h + 0.75)]
    got = forward(model, [x])
    assert np.allclose(got, expected, rtol=0, atol=1e-12)
    assert np.all((got > 0) & (got < 1))
    label, score = predict_mlp(model, [x])
    assert label == "S" and score == pytest.approx(expected[0], abs=1e-12)
    with pytest.raises(ArityMismatch):
        forward(model, [1.0, 2.0])


def test_inference_clamps_to_training_range():
    model = MlpModel(np.array([[2.0]]), np.zeros(1), np.array([[1.0, -1.0]]),
                     np.zeros(2), np.array([0.0]), np.array([1.0]))
    assert np.array_equal(forward(model, [5.0]), forward(model, [1.0]))
    assert np.array_equal(forward(model, [-5.0]), forward(model, [0.0]))


def test_train_separable_toy_set():
    model, trace = train_mlp(TOY, epochs=500, seed=0)
    assert len(trace) == 500
    labels = [predict_mlp(model, x)[0] for x in TOY_X]
    assert labels == ["S" if t else "N" for t in TOY_Y]


def test_train_zero_epochs_returns_init():
    model, trace = train_mlp(TOY, epochs=0, seed=3)
    init = init_network(2, None, seed=3)
    assert len(trace) == 0
    assert all(np.array_equal(p, q) for p, q in zip(model.params(), init.params()))


def test_train_deterministic():
    a, _ = train_mlp(TOY, epochs=50, seed=11)
    b, _ = train_mlp(TOY, epochs=50, seed=11)
    assert a.to_text() == b.to_text()


def test_train_errors():
    with pytest.raises(EmptyClass):
        train_mlp(TOY_X, np.ones(8))
    with pytest.raises(ConfigError):
        train_mlp(TOY, loss="hinge")


def test_full_batch_loss_non_increasing():
    _, trace = train_mlp(TOY, lr=0.01, momentum=0.0, epochs=300, batch="full")
    assert np.all(np.diff(trace.loss) <= 1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["squared", "cross_entropy"]))
def test_gradient_matches_finite_differences(seed, loss):
    model, data = random_mlp_draw(np.random.default_rng(seed))
    assert gradient_check(model, data, h=1e-5, loss=loss) < 1e-4


def test_gradient_zero_point():
    model = init_network(1, 2)
    for p in model.params():
        p[...] = 0.0
    data = Dataset(np.array([[0.0], [1.0]]), np.array([1, 0]), ("x",))
    assert gradient_check(model, data) < 1e-4


def test_gradient_error_shrinks_with_step():
    model, data = random_mlp_draw(np.random.default_rng(42))
    errs = [gradient_check(model, data, h=h) for h in (1e-2, 1e-3, 1e-4, 1e-5)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[3] < 1e-6


def test_mean_loss_squared_definition():
    model = init_network(2, 2, seed=1)
    O = forward(model, TOY_X)
    T = np.column_stack([TOY_Y, 1 - TOY_Y])
    assert mean_loss(model, TOY_X, TOY_Y) == pytest.approx(
        np.mean(0.5 * ((O - T) ** 2).sum(axis=1)), abs=1e-15)


def test_predictions_invariant_to_affine_rescaling():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    a, b = np.array([3.0, 0.01, 250.0]), np.array([-7.0, 100.0, 0.5])
    m1, _ = train_mlp(X, y, epochs=60, seed=5)
    m2, _ = train_mlp(X * a + b, y, epochs=60, seed=5)
    probe = rng.normal(size=(25, 3))
    s1, s2 = forward(m1, probe), forward(m2, probe * a + b)
    assert np.allclose(s1, s2, atol=1e-9)
    assert np.array_equal(s1[:, 0] > s1[:, 1], s2[:, 0] > s2[:, 1])


def test_model_text_round_trip():
    model, _ = train_mlp(TOY, epochs=20, seed=2)
    back = MlpModel.from_text(model.to_text())
    assert back.to_text() == model.to_text()
    assert np.array_equal(forward(back, TOY_X), forward(model, TOY_X))


def test_estimator_api():
    clf = MLPWeldClassifier(epochs=500).fit(TOY_X, TOY_Y)
    assert clf.predict(TOY_X).tolist() == TOY_Y.tolist()
    assert clf.get_params()["learning_rate"] == 0.3
    scores = clf.decision_function(TOY_X)
    assert np.all(scores[TOY_Y == 1] > 0.5) and np.all(scores[TOY_Y == 0] < 0.5)
    loaded = MLPWeldClassifier.from_model(MlpModel.from_text(clf.model_.to_text()))
    assert np.array_equal(loaded.predict(TOY_X), clf.predict(TOY_X))
