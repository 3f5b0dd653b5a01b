"""
Bias-free feedforward networks with scalar output.

A network of depth l holds weights W^1..W^l, W^j of shape p_j x p_{j+1}, and
one activation per layer. Layer l is applied first:

    f(x) = f^1[W^1 f^2[... f^l[W^l x]]]

Widths are p_1 = 1 (scalar output) through p_{l+1} = d (input dimension).
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParseError, ShapeError, ValidationError
from .files import atomic_write_text, read_json

logger = logging.getLogger(__name__)


class ActivationKind(str, Enum):
    IDENTITY = "identity"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"


@dataclass(frozen=True)
class Activation:
    """Elementwise, positively homogeneous activation; uniform within a layer."""

    kind: ActivationKind
    slope: float = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ActivationKind(self.kind))
        if self.kind is ActivationKind.LEAKY_RELU:
            if self.slope is None or not 0.0 < float(self.slope) < 1.0:
                raise ValidationError(f"leaky ReLU slope must lie in (0, 1), got {self.slope!r}")
            object.__setattr__(self, "slope", float(self.slope))
        elif self.slope is not None:
            raise ValidationError(f"{self.kind.value} activation takes no slope")

    def __str__(self):
        if self.kind is ActivationKind.LEAKY_RELU:
            return f"leaky_relu({self.slope:g})"
        return self.kind.value

    @property
    def nonnegative_valued(self):
        """True when f maps into [0, inf)."""
        return self.kind is ActivationKind.RELU

    def to_dict(self):
        if self.kind is ActivationKind.LEAKY_RELU:
            return {"kind": self.kind.value, "slope": self.slope}
        return {"kind": self.kind.value}


IDENTITY = Activation(ActivationKind.IDENTITY)
RELU = Activation(ActivationKind.RELU)


def leaky_relu(slope):
    return Activation(ActivationKind.LEAKY_RELU, slope)


def apply_activation(act, t):
    """Evaluate the activation on a scalar or an array."""
    if act.kind is ActivationKind.IDENTITY:
        return t
    if act.kind is ActivationKind.RELU:
        return np.maximum(t, 0.0)
    return np.where(t >= 0.0, t, act.slope * t)


def activation_derivative(act, t):
    """
    Derivative used by backpropagation.

    At t = 0 the left derivative is taken: 0 for ReLU, the slope for leaky ReLU.
    """
    t = np.asarray(t, dtype=np.float64)
    if act.kind is ActivationKind.IDENTITY:
        return np.ones_like(t)
    if act.kind is ActivationKind.RELU:
        return (t > 0.0).astype(np.float64)
    return np.where(t > 0.0, 1.0, act.slope)


@dataclass(frozen=True, eq=False)
class Network:
    weights: tuple
    activations: tuple

    def __post_init__(self):
        weights = []
        for j, w in enumerate(self.weights, start=1):
            w = np.array(w, dtype=np.float64)
            if w.ndim != 2 or w.shape[0] == 0 or w.shape[1] == 0:
                raise ValidationError(f"W^{j} must be a nonempty matrix, got shape {w.shape}")
            if not np.all(np.isfinite(w)):
                raise ValidationError(f"W^{j} holds non-finite entries")
            w.setflags(write=False)
            weights.append(w)
        if not weights:
            raise ValidationError("a network needs at least one layer")
        if weights[0].shape[0] != 1:
            raise ValidationError(f"output width p_1 must be 1, got {weights[0].shape[0]}")
        for j in range(len(weights) - 1):
            if weights[j].shape[1] != weights[j + 1].shape[0]:
                raise ValidationError(
                    f"W^{j + 1} {weights[j].shape} does not chain with W^{j + 2} {weights[j + 1].shape}"
                )
        activations = tuple(a if isinstance(a, Activation) else Activation(**a) for a in self.activations)
        if len(activations) != len(weights):
            raise ValidationError(f"{len(activations)} activations for {len(weights)} layers")
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "activations", activations)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.activations == other.activations and len(self.weights) == len(other.weights) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.weights, other.weights)
        )

    __hash__ = None

    @property
    def depth(self):
        return len(self.weights)

    @property
    def widths(self):
        """(p_1, ..., p_{l+1})"""
        return tuple(w.shape[0] for w in self.weights) + (self.weights[-1].shape[1],)

    @property
    def input_dim(self):
        return self.weights[-1].shape[1]

    def with_weights(self, weights):
        return Network(tuple(weights), self.activations)


@dataclass
class ForwardTrace:
    """Pre- and post-activations per layer; index 0 is layer 1."""

    inputs: np.ndarray
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)

    def layer_input(self, j):
        """Input fed to W^j (1-based): post-activation of layer j+1 or the data."""
        return self.post[j] if j < len(self.post) else self.inputs


def _check_input(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != net.input_dim:
        raise ShapeError(f"input of shape {x.shape} does not match input dimension {net.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ShapeError("inputs must be finite")
    return x


def trace_columns(weights, activations, columns):
    """Forward pass on inputs stored as columns (d x n or a length-d vector)."""
    trace = ForwardTrace(inputs=columns)
    pre = [None] * len(weights)
    post = [None] * len(weights)
    h = columns
    for j in range(len(weights) - 1, -1, -1):
        z = weights[j] @ h
        h = apply_activation(activations[j], z)
        pre[j] = z
        post[j] = h
    trace.pre = pre
    trace.post = post
    return trace


def forward_trace(net, x):
    """
    Forward pass that keeps every intermediate.

    x is a length-d vector or an n x d batch (one sample per row); the output
    is a float or a length-n vector accordingly.
    """
    x = _check_input(net, x)
    columns = x if x.ndim == 1 else x.T
    trace = trace_columns(net.weights, net.activations, columns)
    out = trace.post[0][0]
    return (float(out) if x.ndim == 1 else np.array(out)), trace


def forward(net, x):
    return forward_trace(net, x)[0]


def predict(net, inputs):
    """Outputs for an n x d batch."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    return forward_trace(net, inputs)[0]


def network_to_dict(net):
    return {
        "widths": list(net.widths),
        "activations": [a.to_dict() for a in net.activations],
        "weights": [w.ravel().tolist() for w in net.weights],
    }


def network_from_dict(doc, source="<model>"):
    """Rebuild a network, reporting the offending field on malformed input."""
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be an object")
    for key in ("widths", "activations", "weights"):
        if key not in doc:
            raise ParseError(f"{source}: missing field '{key}'")
    unknown = set(doc) - {"widths", "activations", "weights"}
    if unknown:
        raise ParseError(f"{source}: unknown fields {sorted(unknown)}")
    widths = doc["widths"]
    if not isinstance(widths, list) or len(widths) < 2 or not all(
        isinstance(p, int) and not isinstance(p, bool) and p > 0 for p in widths
    ):
        raise ParseError(f"{source}: 'widths' must be a list of at least two positive integers")
    if widths[0] != 1:
        raise ValidationError(f"{source}: output width p_1 must be 1, got {widths[0]}")
    depth = len(widths) - 1
    if not isinstance(doc["weights"], list) or len(doc["weights"]) != depth:
        raise ParseError(f"{source}: 'weights' must list {depth} matrices")
    if not isinstance(doc["activations"], list) or len(doc["activations"]) != depth:
        raise ParseError(f"{source}: 'activations' must list {depth} entries")

    weights = []
    for j, flat in enumerate(doc["weights"]):
        rows, cols = widths[j], widths[j + 1]
        if not isinstance(flat, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in flat
        ):
            raise ParseError(f"{source}: weights[{j}] must be a list of numbers")
        if len(flat) != rows * cols:
            raise ParseError(f"{source}: weights[{j}] has {len(flat)} numbers, expected {rows}x{cols}={rows * cols}")
        weights.append(np.array(flat, dtype=np.float64).reshape(rows, cols))

    activations = []
    for j, entry in enumerate(doc["activations"]):
        if not isinstance(entry, dict) or "kind" not in entry or set(entry) - {"kind", "slope"}:
            raise ParseError(f"{source}: activations[{j}] must be {{'kind': ..., 'slope'?: ...}}")
        try:
            activations.append(Activation(entry["kind"], entry.get("slope")))
        except ValueError as e:
            raise ParseError(f"{source}: activations[{j}]: {e}") from e
    return Network(tuple(weights), tuple(activations))


def save_model(net, path):
    atomic_write_text(path, json.dumps(network_to_dict(net), indent=1) + "\n")
    logger.debug("wrote model with widths %s to %s", net.widths, path)


def load_model(path):
    return network_from_dict(read_json(path), source=str(path))
