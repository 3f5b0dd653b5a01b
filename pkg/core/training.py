"""
Least-squares fitting of networks by mini-batch (sub)gradient descent.

The objective is the penalized least-squares criterion

    sum_i (y_i - f_V(x_i))^2 + h(V)

with h given by RegWeights. Each step moves along the batch mean of the
per-sample squared-error gradients plus one full subgradient of h, so the
penalty weights are measured against the mean loss. Reported objectives use
the summed form above.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError, ShapeError
from .network import Network, activation_derivative, predict, trace_columns
from .numkit import RngStream, sample_uniform
from .regularizers import RegWeights, regularizer_subgradient, total_regularizer

logger = logging.getLogger(__name__)

# Objective values above this count as divergence
DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class DataSet:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        targets = np.asarray(self.targets, dtype=np.float64).ravel()
        if inputs.shape[0] != targets.shape[0]:
            raise ShapeError(f"{inputs.shape[0]} input rows but {targets.shape[0]} targets")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ShapeError("data must be finite")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.targets.shape[0]

    @property
    def input_dim(self):
        return self.inputs.shape[1]

    def subset(self, index):
        return DataSet(self.inputs[index], self.targets[index])


@dataclass(frozen=True)
class GlorotUniform:
    """Entries uniform on +-sqrt(6 / (p_j + p_{j+1}))"""


@dataclass(frozen=True)
class UniformRange:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ParameterError(f"UniformRange needs lo < hi, got ({self.lo}, {self.hi})")


@dataclass(frozen=True)
class Warm:
    network: Network


@dataclass(frozen=True)
class Zeros:
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 10
    learning_rate: float = 1e-2
    epochs: int = 200
    seed: int = 0
    shuffle: bool = True
    init: object = field(default_factory=GlorotUniform)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be positive, got {self.batch_size}")
        if not self.learning_rate > 0.0:
            raise ParameterError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ParameterError(f"epochs must be non-negative, got {self.epochs}")


@dataclass
class FitReport:
    objectives: list
    final_objective: float
    epochs_run: int


def initialize(widths, activations, init, seed):
    """Starting network for the given architecture."""
    widths = tuple(widths)
    if isinstance(init, Warm):
        if init.network.widths != widths:
            raise ShapeError(f"warm start has widths {init.network.widths}, expected {widths}")
        return init.network
    rng = RngStream(seed).child("init")
    weights = []
    for j in range(len(widths) - 1):
        rows, cols = widths[j], widths[j + 1]
        if isinstance(init, Zeros):
            weights.append(np.zeros((rows, cols)))
        elif isinstance(init, UniformRange):
            weights.append(sample_uniform(rng.child("layer", j + 1), init.lo, init.hi, rows, cols))
        elif isinstance(init, GlorotUniform):
            bound = math.sqrt(6.0 / (rows + cols))
            weights.append(sample_uniform(rng.child("layer", j + 1), -bound, bound, rows, cols))
        else:
            raise ParameterError(f"unknown init scheme {init!r}")
    return Network(tuple(weights), tuple(activations))


def _check_data(net, data):
    if data.input_dim != net.input_dim:
        raise ShapeError(f"data of dimension {data.input_dim} for a network with input dimension {net.input_dim}")


def lsq_loss(net, data):
    _check_data(net, data)
    residuals = data.targets - predict(net, data.inputs)
    return float(np.dot(residuals, residuals))


def _gradient(weights, activations, inputs, targets):
    """Squared-error loss and its gradient for weights held as a plain list."""
    trace = trace_columns(weights, activations, inputs.T)
    residuals = trace.post[0][0] - targets
    loss = float(np.dot(residuals, residuals))
    upstream = 2.0 * residuals[np.newaxis, :]
    grads = [None] * len(weights)
    for j in range(len(weights)):
        local = upstream * activation_derivative(activations[j], trace.pre[j])
        grads[j] = local @ trace.layer_input(j + 1).T
        if j + 1 < len(weights):
            upstream = weights[j].T @ local
    return loss, grads


def backprop(net, batch):
    """Gradient of sum_batch (y - f(x))^2 with respect to every weight entry."""
    _check_data(net, batch)
    return _gradient(net.weights, net.activations, batch.inputs, batch.targets)[1]


def finite_diff_grad(net, batch, step=1e-6, reg=None):
    """Central differences of the loss (plus the regularizer when given)."""
    if not step > 0.0:
        raise ParameterError(f"finite-difference step must be positive, got {step}")

    def objective(weights):
        candidate = net.with_weights(weights)
        value = lsq_loss(candidate, batch)
        if reg is not None:
            value += total_regularizer(candidate, reg)
        return value

    base = [w.copy() for w in net.weights]
    grads = []
    for j, w in enumerate(base):
        g = np.zeros_like(w)
        for idx in np.ndindex(*w.shape):
            original = w[idx]
            w[idx] = original + step
            upper = objective(base)
            w[idx] = original - step
            lower = objective(base)
            w[idx] = original
            g[idx] = (upper - lower) / (2.0 * step)
        grads.append(g)
    return grads


def gradient_check(net, batch, reg=None, step=1e-6, floor=1e-3):
    """
    Largest entrywise relative error between the analytic (sub)gradient of the
    penalized objective and its central finite differences.

    Entries whose magnitude is below floor are compared relative to floor.
    """
    analytic = backprop(net, batch)
    if reg is not None:
        analytic = [g + r for g, r in zip(analytic, regularizer_subgradient(net, reg))]
    numeric = finite_diff_grad(net, batch, step=step, reg=reg)
    worst = 0.0
    for a, b in zip(analytic, numeric):
        scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
        worst = max(worst, float(np.max(np.abs(a - b) / scale)))
    return worst


def _objective(weights, activations, data, reg):
    trace = trace_columns(weights, activations, data.inputs.T)
    residuals = data.targets - trace.post[0][0]
    return float(np.dot(residuals, residuals)) + total_regularizer(weights, reg)


def sgd_fit(start, data, cfg, reg=None):
    """
    Mini-batch subgradient descent on the penalized least-squares objective.

    Each epoch reshuffles the samples from the seeded stream (when cfg.shuffle)
    and walks consecutive batches, keeping a final short batch.

    Returns:
        (fitted network, FitReport with the objective after every epoch)

    Raises:
        DivergenceError: the objective became non-finite or exceeded DIVERGENCE_LIMIT
    """
    _check_data(start, data)
    reg = reg if reg is not None else RegWeights.zeros(start.depth)
    if reg.depth != start.depth:
        raise ParameterError(f"tuning vectors are for depth {reg.depth}, network has depth {start.depth}")

    n = len(data)
    batch_size = min(cfg.batch_size, n)
    activations = start.activations
    weights = [w.copy() for w in start.weights]
    rng = RngStream(cfg.seed).child("shuffle")
    penalized = not reg.is_zero

    objectives = []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for begin in range(0, n, batch_size):
            index = order[begin:begin + batch_size]
            step += 1
            loss, grads = _gradient(weights, activations, data.inputs[index], data.targets[index])
            if not math.isfinite(loss):
                raise DivergenceError(epoch, step, loss)
            for g in grads:
                g /= len(index)
            if penalized:
                for g, r in zip(grads, regularizer_subgradient(weights, reg)):
                    g += r
            for w, g in zip(weights, grads):
                w -= cfg.learning_rate * g
        value = _objective(weights, activations, data, reg)
        if not math.isfinite(value) or value > DIVERGENCE_LIMIT:
            raise DivergenceError(epoch, step, value)
        objectives.append(value)
        logger.debug("epoch %d: objective %.6g", epoch, value)

    if objectives:
        final = objectives[-1]
        fitted = Network(tuple(weights), activations)
    else:
        final = _objective(weights, activations, data, reg)
        fitted = start
    return fitted, FitReport(objectives, final, cfg.epochs)
