"""
Synthetic regression data from a random layer-sparse ReLU network.

The true network has input dimension d, l-1 hidden layers of equal width and a
scalar output. W^1 is uniform on (-2, 2); each of W^2..W^l is uniform on (0, 2)
when its sparsity indicator is 0 and on (-2, 2) when it is 1. Inputs are
standard normal, targets are the network output plus standard normal noise.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .condense import ActiveSet, detect_active
from .errors import ParameterError
from .network import Network, predict
from .numkit import RngStream, sample_bernoulli, sample_std_normal, sample_uniform
from .refit import default_activations
from .training import DataSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenConfig:
    """
    Attributes:
        input_dim: d
        width: width of every hidden layer
        hidden_layers: l - 1
        s_w: probability that a hidden matrix is allowed negative entries
        n_train: samples used for fitting (the first ones drawn)
        n_test: held-out samples (the last ones drawn)
        standardize: divide all targets by their root mean square
    """

    input_dim: int = 2
    width: int = 5
    hidden_layers: int = 10
    s_w: float = 0.1
    n_train: int = 100
    n_test: int = 50
    standardize: bool = True

    def __post_init__(self):
        if self.input_dim < 1 or self.width < 1:
            raise ParameterError(f"widths must be positive, got d={self.input_dim}, width={self.width}")
        if self.hidden_layers < 0:
            raise ParameterError(f"hidden_layers must be non-negative, got {self.hidden_layers}")
        if not 0.0 <= self.s_w <= 1.0:
            raise ParameterError(f"s_w must lie in [0, 1], got {self.s_w}")
        if self.n_train < 1 or self.n_test < 1:
            raise ParameterError(f"need at least one train and one test sample, got {self.n_train}/{self.n_test}")

    @property
    def depth(self):
        return self.hidden_layers + 1

    @property
    def widths(self):
        return (1,) + (self.width,) * self.hidden_layers + (self.input_dim,)


@dataclass(frozen=True)
class TrueModel:
    """
    Attributes:
        network: data-generating network, Identity outermost and ReLU elsewhere
        indicators: entry i (0-based) governs W^{i+2}
        active: active set of the true network at tolerance 0
        target_scale: divisor applied to every target
    """

    network: Network
    indicators: tuple
    active: ActiveSet
    target_scale: float = 1.0

    @property
    def shat(self):
        return len(self.active) - 1


def true_network(cfg, rng):
    """Sample the indicators and weights of the data-generating network."""
    widths = cfg.widths
    indicators = tuple(int(s) for s in sample_bernoulli(rng.child("indicators"), cfg.s_w, cfg.hidden_layers))
    weights = [sample_uniform(rng.child("weights", 1), -2.0, 2.0, widths[0], widths[1])]
    for j in range(2, cfg.depth + 1):
        lo = -2.0 if indicators[j - 2] else 0.0
        weights.append(sample_uniform(rng.child("weights", j), lo, 2.0, widths[j - 1], widths[j]))
    return Network(tuple(weights), default_activations(cfg.depth)), indicators


def generate(cfg, rng):
    """
    Draw one simulation data set.

    Args:
        cfg: GenConfig
        rng: RngStream owned by this draw; only child streams are used

    Returns:
        (TrueModel, train DataSet, test DataSet)
    """
    if not isinstance(rng, RngStream):
        rng = RngStream(rng)
    network, indicators = true_network(cfg, rng)
    n = cfg.n_train + cfg.n_test
    inputs = sample_std_normal(rng.child("inputs"), n, cfg.input_dim)
    noise = sample_std_normal(rng.child("noise"), n, 1).ravel()
    targets = predict(network, inputs) + noise

    scale = 1.0
    if cfg.standardize:
        scale = float(np.sqrt(np.mean(np.square(targets))))
        if scale > 0.0:
            targets = targets / scale
        else:
            scale = 1.0

    model = TrueModel(network, indicators, detect_active(network, 0.0), scale)
    logger.debug(
        "generated s_w=%g hidden=%d: indicators %s, true shat %d, target scale %.4g",
        cfg.s_w, cfg.hidden_layers, indicators, model.shat, scale,
    )
    train = DataSet(inputs[: cfg.n_train], targets[: cfg.n_train])
    test = DataSet(inputs[cfg.n_train:], targets[cfg.n_train:])
    return model, train, test
