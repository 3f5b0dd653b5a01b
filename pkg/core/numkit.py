"""
Numerical substrate: dense matrices, seeded splittable random streams,
sampling helpers and quantiles.

Matrices are plain 2-D float64 numpy arrays. Every random draw in the package
comes from an RngStream so results are bit-reproducible for a fixed seed and
label path, independent of numpy's own generators.
"""

import hashlib
import math
import struct

import numpy as np

from .errors import ParameterError, ShapeError

MASK64 = 0xFFFFFFFFFFFFFFFF

# SplitMix64 constants
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MULT_1 = 0xBF58476D1CE4E5B9
MIX_MULT_2 = 0x94D049BB133111EB

Matrix = np.ndarray


def _splitmix64(x):
    """SplitMix64 step: returns (output, next_state)."""
    x = (x + GOLDEN_GAMMA) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * MIX_MULT_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MULT_2) & MASK64
    z ^= z >> 31
    return z, x


def _derive_state(seed, path):
    """Hash (seed, label path) into a 64-bit starting state."""
    text = repr((int(seed) & MASK64, tuple(path))).encode()
    return struct.unpack(">Q", hashlib.sha256(text).digest()[:8])[0]


class RngStream:
    """
    Single-owner SplitMix64 stream.

    Child streams are derived from (seed, label path) alone, so deriving a
    child never advances or otherwise touches the parent.
    """

    def __init__(self, seed, path=()):
        self.seed = int(seed) & MASK64
        self.path = tuple(path)
        self._state = _derive_state(self.seed, self.path)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path!r})"

    def child(self, label, index=0):
        return RngStream(self.seed, self.path + (str(label), int(index)))

    def next_u64(self):
        out, self._state = _splitmix64(self._state)
        return out

    def next_float(self):
        """Uniform on [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def next_below(self, n):
        """Integer uniform on {0, ..., n-1} by 64-bit multiply-shift."""
        if n <= 0:
            raise ParameterError(f"next_below needs n > 0, got {n}")
        return (self.next_u64() * n) >> 64

    def permutation(self, n):
        """Fisher-Yates shuffle of range(n), drawing n-1 integers."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            k = self.next_below(i + 1)
            order[i], order[k] = order[k], order[i]
        return np.array(order, dtype=np.intp)


def as_matrix(entries, rows, cols):
    """Build a rows x cols matrix from row-major entries."""
    if rows <= 0 or cols <= 0:
        raise ShapeError(f"matrix dimensions must be positive, got {rows}x{cols}")
    values = np.asarray(entries, dtype=np.float64).ravel()
    if values.size != rows * cols:
        raise ShapeError(f"{values.size} entries cannot fill a {rows}x{cols} matrix")
    if not np.all(np.isfinite(values)):
        raise ParameterError("matrix entries must be finite")
    return values.reshape(rows, cols)


def matmul(a, b):
    """Matrix product with a shape check that names both operands."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def sample_uniform(rng, lo, hi, rows, cols):
    """
    Uniform entries on [lo, hi), filled in row-major order.

    Consumes exactly rows * cols draws. The open/half-open distinction is a
    measure-zero event and is not enforced.
    """
    if not lo < hi:
        raise ParameterError(f"sample_uniform needs lo < hi, got lo={lo}, hi={hi}")
    width = hi - lo
    values = [lo + width * rng.next_float() for _ in range(rows * cols)]
    return np.array(values, dtype=np.float64).reshape(rows, cols)


def sample_std_normal(rng, rows, cols):
    """
    Standard normal entries by Box-Muller.

    Each pair of uniforms (u1, u2) gives r*cos(2*pi*u2) then r*sin(2*pi*u2),
    r = sqrt(-2 log(1 - u1)). For an odd count the sine value of the last
    pair is not used.
    """
    count = rows * cols
    values = []
    while len(values) < count:
        u1 = rng.next_float()
        u2 = rng.next_float()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        angle = 2.0 * math.pi * u2
        values.append(r * math.cos(angle))
        if len(values) < count:
            values.append(r * math.sin(angle))
    return np.array(values, dtype=np.float64).reshape(rows, cols)


def sample_bernoulli(rng, p, count):
    """0/1 vector with P(1) = p, one uniform draw per entry."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"Bernoulli probability must lie in [0, 1], got {p}")
    return np.array([1 if rng.next_float() < p else 0 for _ in range(count)], dtype=np.int64)


def quantile(values, q):
    """Linear-interpolation (type 7) quantile of a nonempty sample."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ParameterError("quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"quantile level must lie in [0, 1], got {q}")
    return float(np.quantile(values, q))
