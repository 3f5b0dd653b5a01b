import numpy as np
import pytest

from core.errors import DivergenceError, ParameterError, ShapeError
from core.network import IDENTITY, RELU, Network, forward, forward_trace, leaky_relu, predict
from core.regularizers import RegWeights, layer_penalty_j, regularizer_subgradient, total_regularizer
from core.training import (
    DataSet,
    GlorotUniform,
    TrainConfig,
    UniformRange,
    Warm,
    Zeros,
    backprop,
    finite_diff_grad,
    gradient_check,
    initialize,
    lsq_loss,
    sgd_fit,
)


def linear_problem(n=20, seed=0):
    gen = np.random.default_rng(seed)
    x = gen.normal(size=(n, 2))
    y = x @ np.array([1.5, -0.5]) + 0.1 * gen.normal(size=n)
    return DataSet(x, y)


def three_layer_truth(seed):
    """Data from a (1, 3, 3, 2) ReLU network whose outer weights are positive."""
    gen = np.random.default_rng(seed)
    truth = Network(
        (gen.uniform(0.5, 1.5, (1, 3)), gen.uniform(-1, 1, (3, 3)), gen.uniform(-1, 1, (3, 2))),
        (IDENTITY, RELU, RELU),
    )
    x = gen.normal(size=(60, 2))
    y = predict(truth, x) + 0.1 * gen.normal(size=60)
    return DataSet(x, y)


class TestLoss:
    """Least-squares data fit"""

    def test_perfect_fit(self):
        net = Network((np.array([[2.0, -1.0]]),), (IDENTITY,))
        x = np.array([[1.0, 0.0], [0.5, 3.0]])
        assert lsq_loss(net, DataSet(x, predict(net, x))) == 0.0

    def test_single_sample(self):
        net = Network((np.zeros((1, 2)),), (IDENTITY,))
        assert lsq_loss(net, DataSet([[1.0, 2.0]], [1.0])) == 1.0

    def test_matches_loop(self):
        gen = np.random.default_rng(1)
        net = initialize((1, 3, 2), (IDENTITY, RELU), GlorotUniform(), 4)
        data = DataSet(gen.normal(size=(8, 2)), gen.normal(size=8))
        expected = sum((y - forward(net, x)) ** 2 for x, y in zip(data.inputs, data.targets))
        assert lsq_loss(net, data) == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch(self):
        net = Network((np.zeros((1, 3)),), (IDENTITY,))
        with pytest.raises(ShapeError):
            lsq_loss(net, DataSet([[1.0, 2.0]], [0.0]))

    def test_dataset_checks(self):
        with pytest.raises(ShapeError):
            DataSet(np.zeros((3, 2)), np.zeros(2))
        with pytest.raises(ShapeError):
            DataSet([[np.nan, 1.0]], [0.0])


class TestGradients:
    """Backpropagation against calculus and finite differences"""

    def test_linear_case(self):
        gen = np.random.default_rng(2)
        w = gen.normal(size=(1, 3))
        net = Network((w,), (IDENTITY,))
        data = DataSet(gen.normal(size=(6, 3)), gen.normal(size=6))
        residual = data.inputs @ w[0] - data.targets
        expected = 2.0 * residual @ data.inputs
        np.testing.assert_allclose(backprop(net, data)[0][0], expected, rtol=1e-12)

    def test_zero_residual(self):
        net = initialize((1, 4, 3, 2), (IDENTITY, RELU, RELU), GlorotUniform(), 9)
        x = np.random.default_rng(3).normal(size=(5, 2))
        for g in backprop(net, DataSet(x, predict(net, x))):
            np.testing.assert_array_equal(g, np.zeros_like(g))

    def test_finite_differences_exact_for_linear(self):
        gen = np.random.default_rng(4)
        net = Network((gen.normal(size=(1, 3)),), (IDENTITY,))
        data = DataSet(gen.normal(size=(5, 3)), gen.normal(size=5))
        np.testing.assert_allclose(finite_diff_grad(net, data)[0], backprop(net, data)[0], rtol=0, atol=1e-8)

    def test_finite_differences_symmetric_under_input_flip(self):
        net = Network((np.zeros((1, 2)),), (IDENTITY,))
        x = np.array([[1.0, -2.0], [0.5, 0.3]])
        y = np.array([1.0, -1.0])
        g = finite_diff_grad(net, DataSet(x, y))[0]
        g_flipped = finite_diff_grad(net, DataSet(-x, -y))[0]
        np.testing.assert_allclose(g, g_flipped, atol=1e-8)

    def test_step_must_be_positive(self):
        net = Network((np.zeros((1, 2)),), (IDENTITY,))
        with pytest.raises(ParameterError):
            finite_diff_grad(net, DataSet([[1.0, 1.0]], [0.0]), step=0.0)

    def test_backprop_and_subgradient_match_finite_differences(self):
        gen = np.random.default_rng(5)
        kinds = [RELU, leaky_relu(0.2), IDENTITY]
        accepted = 0
        for _ in range(3000):
            if accepted == 100:
                break
            depth = int(gen.integers(1, 4))
            widths = [1] + [int(gen.integers(1, 4)) for _ in range(depth)]
            weights = []
            for j in range(depth):
                shape = (widths[j], widths[j + 1])
                w = gen.uniform(0.2, 1.0, shape) * gen.choice([-1.0, 1.0], shape)
                w[0, 0] = -abs(w[0, 0])
                weights.append(w)
            activations = (IDENTITY,) + tuple(kinds[gen.integers(3)] for _ in range(depth - 1))
            net = Network(tuple(weights), activations)
            data = DataSet(gen.normal(size=(4, widths[-1])), gen.normal(size=4))
            _, trace = forward_trace(net, data.inputs)
            if any(np.abs(pre).min() < 1e-3 for pre, act in zip(trace.pre, activations) if act is not IDENTITY):
                continue
            reg = RegWeights(
                tuple(gen.uniform(0, 1, depth)), tuple(gen.uniform(0, 1, depth)), tuple(gen.uniform(0, 1, depth - 1))
            )
            analytic = [g + r for g, r in zip(backprop(net, data), regularizer_subgradient(net, reg))]
            # central differences carry ~1e-9 absolute rounding error
            if min(np.abs(g).min() for g in analytic) < 1e-2:
                continue
            assert gradient_check(net, data, reg, floor=1e-8) <= 1e-5
            accepted += 1
        assert accepted == 100


class TestInitialize:
    """Starting networks"""

    def test_glorot_bounds(self):
        net = initialize((1, 5, 5, 2), (IDENTITY, RELU, RELU), GlorotUniform(), 1)
        for w in net.weights:
            bound = np.sqrt(6.0 / sum(w.shape))
            assert np.abs(w).max() <= bound

    def test_uniform_range(self):
        net = initialize((1, 4, 2), (IDENTITY, RELU), UniformRange(0.0, 0.5), 2)
        assert all(w.min() >= 0.0 and w.max() < 0.5 for w in net.weights)

    def test_zeros(self):
        net = initialize((1, 4, 2), (IDENTITY, RELU), Zeros(), 2)
        assert all(not w.any() for w in net.weights)

    def test_warm(self):
        start = initialize((1, 4, 2), (IDENTITY, RELU), GlorotUniform(), 3)
        assert initialize((1, 4, 2), (IDENTITY, RELU), Warm(start), 99) is start
        with pytest.raises(ShapeError):
            initialize((1, 3, 2), (IDENTITY, RELU), Warm(start), 0)

    def test_seeded(self):
        a = initialize((1, 4, 2), (IDENTITY, RELU), GlorotUniform(), 5)
        b = initialize((1, 4, 2), (IDENTITY, RELU), GlorotUniform(), 5)
        assert a == b

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ParameterError):
            TrainConfig(batch_size=0)
        with pytest.raises(ParameterError):
            UniformRange(1.0, -1.0)


class TestSgdFit:
    """Mini-batch subgradient descent"""

    def test_zero_epochs_returns_start(self):
        start = initialize((1, 2), (IDENTITY,), GlorotUniform(), 0)
        fitted, report = sgd_fit(start, linear_problem(), TrainConfig(epochs=0))
        assert fitted is start
        assert report.objectives == []
        assert report.epochs_run == 0

    def test_full_batch_descent_is_monotone(self):
        data = linear_problem()
        start = initialize((1, 2), (IDENTITY,), GlorotUniform(), 1)
        cfg = TrainConfig(batch_size=len(data), learning_rate=1e-3, epochs=50)
        _, report = sgd_fit(start, data, cfg)
        assert all(b < a for a, b in zip(report.objectives, report.objectives[1:]))
        assert report.objectives[-1] < lsq_loss(start, data)

    def test_deterministic(self):
        data = three_layer_truth(0)
        start = initialize((1, 3, 3, 2), (IDENTITY, RELU, RELU), GlorotUniform(), 7)
        cfg = TrainConfig(epochs=20, seed=11)
        reg = RegWeights.layer_only(3, 0.5)
        a, _ = sgd_fit(start, data, cfg, reg)
        b, _ = sgd_fit(start, data, cfg, reg)
        assert a == b

    def test_objective_accounting(self):
        data = three_layer_truth(1)
        start = initialize((1, 3, 3, 2), (IDENTITY, RELU, RELU), GlorotUniform(), 2)
        reg = RegWeights((0.1, 0.0, 0.0), (0.0, 0.2, 0.0), (0.5, 0.5))
        _, report = sgd_fit(start, data, TrainConfig(epochs=5, seed=3), reg)
        assert len(report.objectives) == 5
        for epochs in range(1, 6):
            fitted, _ = sgd_fit(start, data, TrainConfig(epochs=epochs, seed=3), reg)
            expected = lsq_loss(fitted, data) + total_regularizer(fitted, reg)
            assert abs(report.objectives[epochs - 1] - expected) <= 1e-9 * max(1.0, expected)

    def test_batch_larger_than_data(self):
        data = linear_problem(n=7)
        start = initialize((1, 2), (IDENTITY,), GlorotUniform(), 1)
        _, report = sgd_fit(start, data, TrainConfig(batch_size=100, learning_rate=1e-3, epochs=3))
        assert report.epochs_run == 3

    def test_divergence(self):
        data = linear_problem()
        start = initialize((1, 2), (IDENTITY,), GlorotUniform(), 1)
        with pytest.raises(DivergenceError) as info:
            sgd_fit(start, data, TrainConfig(learning_rate=10.0, epochs=200))
        assert info.value.epoch >= 1

    def test_layer_penalty_reaches_exact_zero(self):
        hits = 0
        for seed in range(50):
            data = three_layer_truth(seed)
            start = initialize((1, 3, 3, 2), (IDENTITY, RELU, RELU), GlorotUniform(), seed)
            reg = RegWeights.layer_only(3, [10.0, 0.0])
            fitted, _ = sgd_fit(start, data, TrainConfig(epochs=100, seed=seed), reg)
            if layer_penalty_j(fitted.weights[0]) == 0.0:
                hits += 1
        assert hits >= 48
