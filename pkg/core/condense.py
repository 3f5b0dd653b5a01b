"""
Active-layer detection and network condensation.

A layer j < l whose weight matrix is entrywise non-negative is inactive and
can be merged with its neighbour. Two merge rules are provided:

  as-stated   the width-scaled product p_{j+1} W^j W^{j+1} with the composed
              activation. Exact when the
              middle width is 1 or the inner activation is linear, not exact
              in general.
  sound       drops f^j and multiplies W^j into the enclosing matrix, which is
              exact whenever f^j(t) = t on t >= 0 and f^{j+1} is non-negative
              valued (or f^j is the identity).

verify_equivalence measures the gap between two networks on probe inputs.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError, PreconditionError, ShapeError, SoundnessError
from .network import IDENTITY, RELU, ActivationKind, Network, leaky_relu, predict
from .numkit import matmul

logger = logging.getLogger(__name__)

# Tolerance for flagging layers after SGD, which leaves tiny negative residue
DEFAULT_CLI_TOLERANCE = 1e-6


class CondenseMode(str, Enum):
    AS_STATED = "as-stated"
    SOUND = "sound"


@dataclass(frozen=True)
class ActiveSet:
    """Sorted 1-based indices of active layers; always contains the depth l."""

    indices: tuple
    depth: int
    tolerance: float = 0.0

    def __post_init__(self):
        indices = tuple(sorted(set(int(j) for j in self.indices)))
        if self.depth not in indices:
            raise ParameterError(f"active set {indices} must contain the innermost layer {self.depth}")
        if indices[0] < 1:
            raise ParameterError(f"active set {indices} holds indices outside 1..{self.depth}")
        if self.tolerance < 0.0:
            raise ParameterError(f"tolerance must be non-negative, got {self.tolerance}")
        object.__setattr__(self, "indices", indices)

    def __contains__(self, j):
        return j in self.indices

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    @property
    def inactive(self):
        return tuple(j for j in range(1, self.depth) if j not in self.indices)


@dataclass
class CondensationReport:
    mode: CondenseMode
    active: ActiveSet
    original_params: int
    condensed_params: int
    max_residual: float
    condensed: Network

    def to_dict(self):
        return {
            "mode": self.mode.value,
            "active_layers": list(self.active.indices),
            "tolerance": self.active.tolerance,
            "original_depth": self.active.depth,
            "condensed_depth": self.condensed.depth,
            "original_params": self.original_params,
            "condensed_params": self.condensed_params,
            "max_residual": self.max_residual,
        }


def param_count(net):
    p = net.widths
    return sum(p[j] * p[j + 1] for j in range(net.depth))


def detect_active(net, tol=0.0):
    """Layer j < l is active iff min(W^j) < -tol; layer l always is."""
    if tol < 0.0:
        raise ParameterError(f"tolerance must be non-negative, got {tol}")
    indices = [j for j in range(1, net.depth) if float(net.weights[j - 1].min()) < -tol]
    indices.append(net.depth)
    return ActiveSet(tuple(indices), net.depth, tol)


def clamp_small_negatives(net, tol):
    """Zero the entries in [-tol, 0) of the layers that are inactive at tolerance tol."""
    active = detect_active(net, tol)
    if tol == 0.0 or not active.inactive:
        return net
    weights = list(net.weights)
    for j in active.inactive:
        w = weights[j - 1].copy()
        w[(w < 0.0) & (w >= -tol)] = 0.0
        weights[j - 1] = w
    return net.with_weights(weights)


def merged_kind(outer, inner):
    """Activation equal to outer(inner(t)) for the supported kinds."""
    if outer.kind is ActivationKind.IDENTITY:
        return inner
    if inner.kind is ActivationKind.IDENTITY:
        return outer
    if outer.kind is ActivationKind.LEAKY_RELU and inner.kind is ActivationKind.LEAKY_RELU:
        return leaky_relu(outer.slope * inner.slope)
    # any remaining pair involves a ReLU and produces one
    return RELU


def _require_nonnegative(net, j, hint=""):
    w = net.weights[j - 1]
    if w.min() < 0.0:
        position = np.unravel_index(int(np.argmin(w)), w.shape)
        value = float(w[position])
        raise PreconditionError(
            j,
            tuple(int(k) for k in position),
            value,
            f"layer {j} is not inactive: entry {tuple(int(k) for k in position)} is {value!r} < 0{hint}",
        )


def merge_pair_as_stated(net, j):
    """Replace layers j, j+1 by one layer with weight p_{j+1} W^j W^{j+1}."""
    if not 1 <= j <= net.depth - 1:
        raise ParameterError(f"merge index must lie in 1..{net.depth - 1}, got {j}")
    _require_nonnegative(net, j)
    middle = net.widths[j]
    merged = middle * matmul(net.weights[j - 1], net.weights[j])
    weights = net.weights[: j - 1] + (merged,) + net.weights[j + 1:]
    kind = merged_kind(net.activations[j - 1], net.activations[j])
    activations = net.activations[: j - 1] + (kind,) + net.activations[j + 1:]
    return Network(weights, activations)


def condense_as_stated(net, active, scaled=True):
    """
    Merge every run of inactive layers into the next active layer.

    For consecutive active indices j_{i-1} < j_i the layers a = j_{i-1}+1 .. j_i
    become one layer with weight (p_{a+1} ... p_{j_i}) W^a ... W^{j_i} and the
    composed activation f^a o ... o f^{j_i}. With scaled=False the width factor
    is left out.
    """
    if active.depth != net.depth:
        raise ParameterError(f"active set is for depth {active.depth}, network has depth {net.depth}")
    for j in active.inactive:
        _require_nonnegative(net, j, "; clamp small negatives before condensing")
    p = net.widths
    weights, activations = [], []
    previous = 0
    for b in active.indices:
        a = previous + 1
        m = net.weights[a - 1]
        kind = net.activations[a - 1]
        scale = 1.0
        for k in range(a + 1, b + 1):
            m = matmul(m, net.weights[k - 1])
            kind = merged_kind(kind, net.activations[k - 1])
            if scaled:
                scale *= p[k - 1]
        weights.append(scale * m)
        activations.append(kind)
        previous = b
    return Network(tuple(weights), tuple(activations))


def _droppable(net, active, k):
    """Whether f^k can be removed exactly; raises for inactive layers that cannot."""
    act = net.activations[k - 1]
    if act.kind is ActivationKind.IDENTITY:
        return True
    if k in active:
        return False
    inner = net.activations[k]
    if not inner.nonnegative_valued:
        raise SoundnessError(k, f"{act} over a non-negative matrix needs a non-negative inner activation, got {inner}")
    return True


def condense_sound(net, tol=0.0):
    """
    Exact condensation.

    Small negatives in inactive layers are clamped first. Each dropped layer's
    weight is multiplied into the nearest surviving layer above it; when no
    layer survives above, an Identity layer carrying the product is prepended
    so the output stays scalar. No width scaling is applied.
    """
    clamped = clamp_small_negatives(net, tol)
    active = detect_active(clamped, 0.0)
    weights, activations = [], []
    for k in range(1, net.depth + 1):
        w = clamped.weights[k - 1]
        if _droppable(clamped, active, k):
            if weights:
                weights[-1] = matmul(weights[-1], w)
            else:
                weights.append(w)
                activations.append(IDENTITY)
        else:
            weights.append(w)
            activations.append(clamped.activations[k - 1])
    return Network(tuple(weights), tuple(activations))


def verify_equivalence(net_a, net_b, probes):
    """Largest absolute output difference over the probe inputs."""
    probes = np.asarray(probes, dtype=np.float64)
    if probes.size == 0:
        raise ParameterError("no probe inputs to compare the networks on")
    probes = np.atleast_2d(probes)
    if net_a.input_dim != net_b.input_dim or probes.shape[1] != net_a.input_dim:
        raise ShapeError(
            f"input dimensions differ: {net_a.input_dim}, {net_b.input_dim}, probes {probes.shape}"
        )
    return float(np.max(np.abs(predict(net_a, probes) - predict(net_b, probes))))


def condense(net, mode=CondenseMode.AS_STATED, tol=0.0, probes=None):
    """Clamp, detect, condense and measure the residual against the original network."""
    mode = CondenseMode(mode)
    active = detect_active(net, tol)
    if mode is CondenseMode.AS_STATED:
        condensed = condense_as_stated(clamp_small_negatives(net, tol), active)
    else:
        condensed = condense_sound(net, tol)
    residual = verify_equivalence(net, condensed, probes) if probes is not None and len(probes) else float("nan")
    report = CondensationReport(mode, active, param_count(net), param_count(condensed), residual, condensed)
    logger.info(
        "condensed (%s) depth %d -> %d, params %d -> %d, active %s, residual %.3g",
        mode.value, net.depth, condensed.depth, report.original_params, report.condensed_params,
        list(active.indices), residual,
    )
    if residual > 1e-9:
        logger.warning("condensed network (%s) deviates from the original by up to %.3g on the probes", mode.value, residual)
    return report


__all__ = [
    "ActiveSet",
    "CondenseMode",
    "CondensationReport",
    "DEFAULT_CLI_TOLERANCE",
    "clamp_small_negatives",
    "condense",
    "condense_as_stated",
    "condense_sound",
    "detect_active",
    "merge_pair_as_stated",
    "merged_kind",
    "param_count",
    "verify_equivalence",
]
