import numpy as np
import pytest

from gradcheck import MLP_CASES, mlp_case
from physpoof.nn import (Mlp, TrainConfig, TrainingDiverged, hard_threshold, l2_loss, predict,
                         sigmoid, softmax_cross_entropy, train)


def test_identity_linear_layer(rng):
    net = Mlp([3, 3], ["linear"])
    net.params[0][:] = np.eye(3)
    x = rng.standard_normal((4, 3))
    assert np.allclose(net(x), x)


def test_relu_and_sigmoid_values():
    net = Mlp([2, 2], ["relu"])
    net.params[0][:] = np.eye(2)
    assert net(np.array([[-1.0, 2.0]])).tolist() == [[0.0, 2.0]]
    assert sigmoid(np.array(0.0)) == 0.5


@pytest.mark.parametrize("acts,loss", MLP_CASES)
def test_backward_matches_finite_differences(acts, loss):
    assert mlp_case(acts, loss, np.random.default_rng(0)) < 1e-4


def test_zero_problem_has_zero_gradient():
    net = Mlp([3, 4, 2], ["relu", "linear"], 0)
    for p in net.params[1::2]:
        p[:] = 0
    x = np.zeros((5, 3))
    out, cache = net.forward(x)
    _, g = l2_loss(out, np.zeros((5, 2)))
    grads, _ = net.backward(cache, g)
    assert all(np.all(gr == 0) for gr in grads)


def test_cross_entropy_gradient_identity(rng):
    logits = rng.standard_normal((4, 5))
    labels = rng.integers(0, 5, 4)
    _, g = softmax_cross_entropy(logits, labels)
    p = np.exp(logits) / np.exp(logits).sum(1, keepdims=True)
    onehot = np.eye(5)[labels]
    assert np.allclose(g * 4, p - onehot)


def test_linear_regression_recovers_weights():
    g = np.random.default_rng(0)
    W = g.standard_normal((4, 2))
    X = g.standard_normal((2000, 4))
    net = Mlp([4, 2], ["linear"], 0)
    train(net, X, X @ W, "l2", TrainConfig(lr=0.05, batch_size=100, steps=3000, optimizer="sgd"))
    assert np.max(np.abs(net.params[0] - W)) < 1e-3
    assert np.max(np.abs(net.params[1])) < 1e-3


def test_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 1, 1, 0])
    net = Mlp([2, 8, 2], ["tanh", "linear"], 3)
    train(net, X, y, "cross_entropy", TrainConfig(lr=0.05, batch_size=4, steps=3000))
    assert np.array_equal(np.argmax(predict(net, X), axis=1), y)


def test_hard_threshold_branches():
    assert hard_threshold([0.3, 0.7, 0.5, 0.0, 1.0]).tolist() == [0, 1, 0, 0, 1]
    with pytest.raises(ValueError):
        hard_threshold([1.5])


def test_training_determinism_and_trace():
    X = np.random.default_rng(0).standard_normal((50, 3))
    runs = []
    for _ in range(2):
        net = Mlp([3, 5, 1], ["relu", "linear"], 1)
        _, trace = train(net, X, X[:, :1], "l2", TrainConfig(steps=20, seed=4))
        runs.append((net.flat(), trace))
    assert np.array_equal(runs[0][0], runs[1][0]) and np.array_equal(runs[0][1], runs[1][1])
    assert runs[0][1].shape == (20,)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    net = Mlp([1, 1], ["linear"], 0)
    X = np.ones((4, 1))
    with pytest.raises(TrainingDiverged):
        train(net, X, np.full((4, 1), 1e200), "l2", TrainConfig(lr=1.0, steps=5, optimizer="sgd"))


def test_save_load_round_trip(tmp_path):
    net = Mlp([4, 6, 2], ["relu", "sigmoid"], 2, dtype=np.float32)
    net.save(tmp_path / "m", {"role": "x"})
    back = Mlp.load(tmp_path / "m", np.float32)
    x = np.random.default_rng(0).standard_normal((3, 4)).astype(np.float32)
    assert np.array_equal(net(x), back(x))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(ValueError):
        Mlp([2, 2], ["swish"])
