"""
Sparsity regularizers and their subgradients.

Three convex penalties act on the weight stack, each weighted per layer:

    connection  h^C = sum_j rC_j * sum |V^j_vw|              (l1)
    node        h^N = sum_j rN_j * sum_v ||V^j_v.||_2         (row-grouped l2,1)
    layer       h^L = sum_{j<l} rL_j * ||neg(V^j)||_2         (negative parts)

The layer penalty vanishes exactly when a matrix is entrywise non-negative,
which is what allows the layer to be merged with its neighbour.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class RegWeights:
    """
    Per-layer tuning vectors.

    Attributes:
        rc: connection weights, length l
        rn: node weights, length l
        rl: layer weights, length l - 1
    """

    rc: tuple
    rn: tuple
    rl: tuple

    def __post_init__(self):
        for name in ("rc", "rn", "rl"):
            values = tuple(float(v) for v in getattr(self, name))
            if any(not np.isfinite(v) or v < 0.0 for v in values):
                raise ParameterError(f"tuning vector {name} must be finite and non-negative, got {values}")
            object.__setattr__(self, name, values)
        if len(self.rc) != len(self.rn) or len(self.rl) != max(len(self.rc) - 1, 0):
            raise ParameterError(
                f"tuning vectors need lengths (l, l, l-1), got ({len(self.rc)}, {len(self.rn)}, {len(self.rl)})"
            )

    @property
    def depth(self):
        return len(self.rc)

    @classmethod
    def zeros(cls, depth):
        return cls((0.0,) * depth, (0.0,) * depth, (0.0,) * (depth - 1))

    @classmethod
    def layer_only(cls, depth, rl):
        """Layer penalty only; rl is a scalar broadcast to every layer or a length l-1 list."""
        if np.isscalar(rl):
            rl = (float(rl),) * (depth - 1)
        return cls((0.0,) * depth, (0.0,) * depth, tuple(rl))

    @property
    def is_zero(self):
        return not any(self.rc) and not any(self.rn) and not any(self.rl)


def neg_part(a):
    """min{a, 0}"""
    return np.minimum(a, 0.0)


def conn_penalty(v):
    return float(np.abs(v).sum())


def node_penalty(v):
    return float(np.linalg.norm(np.asarray(v, dtype=np.float64), axis=1).sum())


def layer_penalty_j(v):
    """
    Euclidean norm of the entrywise negative parts.

    Scaled by the largest magnitude first so that any negative entry, however
    tiny, yields a strictly positive value.
    """
    neg = neg_part(np.asarray(v, dtype=np.float64))
    scale = float(-neg.min()) if neg.size else 0.0
    if scale == 0.0:
        return 0.0
    return scale * float(np.sqrt(np.square(neg / scale).sum()))


def _check_lengths(weights, reg):
    if reg.depth != len(weights):
        raise ParameterError(f"tuning vectors are for depth {reg.depth}, network has depth {len(weights)}")


def total_regularizer(weights, reg):
    """h^C + h^N + h^L for a weight stack (a Network's weights or a plain list)."""
    weights = getattr(weights, "weights", weights)
    _check_lengths(weights, reg)
    total = 0.0
    for j, v in enumerate(weights):
        if reg.rc[j]:
            total += reg.rc[j] * conn_penalty(v)
        if reg.rn[j]:
            total += reg.rn[j] * node_penalty(v)
        if j < len(weights) - 1 and reg.rl[j]:
            total += reg.rl[j] * layer_penalty_j(v)
    return total


def regularizer_subgradient(weights, reg):
    """
    One subgradient per weight matrix.

    At kinks the zero element is chosen: sign(0) = 0, a zero row contributes a
    zero row, and a non-negative matrix contributes nothing to the layer term.
    """
    weights = getattr(weights, "weights", weights)
    _check_lengths(weights, reg)
    grads = []
    for j, v in enumerate(weights):
        g = np.zeros_like(v, dtype=np.float64)
        if reg.rc[j]:
            g += reg.rc[j] * np.sign(v)
        if reg.rn[j]:
            norms = np.linalg.norm(v, axis=1, keepdims=True)
            g += reg.rn[j] * np.divide(v, norms, out=np.zeros_like(g), where=norms > 0.0)
        if j < len(weights) - 1 and reg.rl[j]:
            h = layer_penalty_j(v)
            if h > 0.0:
                g += reg.rl[j] * neg_part(v) / h
        grads.append(g)
    return grads
