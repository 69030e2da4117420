"""
Dense real-valued array operations and seeded randomness.

Matrices are plain 2-D ``float64`` numpy arrays; this module adds the few
model-level primitives the CNN and the MLP need, with shape checks that
raise package errors instead of numpy broadcasting surprises.

Randomness goes through :class:`SeededRng`, a thin owner of a numpy
``Generator`` on the Philox counter-based bit generator. Philox is a
documented, platform-independent stream, so a seed reproduces the same
samples on every machine.
"""

from typing import Any, Dict, Sequence

import numpy as np

from .exceptions import ShapeMismatchError
from .serialization import derive_seed

Matrix = np.ndarray

PROBABILITY_FLOOR = 1e-12


class SeededRng:
    """
    Single-owner seeded random stream.

    Two instances built from the same seed yield bit-identical samples.
    Child streams for sub-tasks come from :meth:`spawn`, which derives a
    fresh seed instead of sharing state, so jobs stay independent.

    Example:
        >>> a, b = SeededRng(3), SeededRng(3)
        >>> bool((a.uniform(-1, 1, 4) == b.uniform(-1, 1, 4)).all())
        True
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.Philox(self.seed))

    def spawn(self, *keys: Any) -> "SeededRng":
        """Independent child stream keyed by ``keys``."""
        return SeededRng(derive_seed(self.seed, *keys))

    def clone(self) -> "SeededRng":
        """Copy that continues from the current position of this stream."""
        twin = SeededRng(self.seed)
        twin._generator.bit_generator.state = self._generator.bit_generator.state
        return twin

    def get_state(self) -> Dict[str, Any]:
        """JSON-compatible position of the stream (checkpoints)."""
        return {"seed": self.seed, "bit_generator": _plain(self._generator.bit_generator.state)}

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "SeededRng":
        rng = cls(int(state["seed"]))
        rng._generator.bit_generator.state = _uint64_arrays(state["bit_generator"])
        return rng

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        if low == high:
            return np.full(size, float(low), dtype=np.float64)
        return self._generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self._generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def bernoulli(self, p: float, size) -> np.ndarray:
        """0/1 float mask with each entry 1 with probability ``p``."""
        return (self._generator.random(size) < p).astype(np.float64)

    def choice_index(self, n: int) -> int:
        return int(self._generator.integers(0, n))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed})"


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return [int(x) for x in value]
    if isinstance(value, np.integer):
        return int(value)
    return value


def _uint64_arrays(value):
    # Philox keeps counter, key and buffer as uint64 arrays
    if isinstance(value, dict):
        return {k: _uint64_arrays(v) for k, v in value.items()}
    if isinstance(value, list):
        return np.asarray(value, dtype=np.uint64)
    return value


def frobenius_inner(a: Matrix, b: Matrix) -> float:
    """
    Sum of the elements of the component-wise product of two matrices.

    Example:
        >>> frobenius_inner(np.array([[1., 2.], [3., 4.]]), np.array([[5., 6.], [7., 8.]]))
        70.0
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError("frobenius_inner", a.shape, b.shape)
    return float(np.vdot(a, b))


def relu(v: np.ndarray) -> np.ndarray:
    """Componentwise max(0, x)."""
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def softmax(logits: Sequence[float]) -> np.ndarray:
    """
    Normalized exponentials, computed after subtracting the maximum.

    Example:
        >>> softmax([0.0, 0.0]).tolist()
        [0.5, 0.5]
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ShapeMismatchError("softmax", z.shape, ("n",))
    e = np.exp(z - z.max())
    return e / e.sum()


def cross_entropy(probs: Sequence[float], gold: int) -> float:
    """
    Negative log-probability of the gold class, floored at PROBABILITY_FLOOR.

    Raises:
        IndexError: If ``gold`` is not a valid class index
    """
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= gold < p.shape[0]:
        raise IndexError(f"gold class {gold} out of range for {p.shape[0]} classes")
    return float(-np.log(max(p[gold], PROBABILITY_FLOOR)))


def sample_uniform(rng: SeededRng, a: float, b: float, n: int) -> np.ndarray:
    """``n`` draws from U[a, b]."""
    if a > b:
        raise ValueError(f"empty interval [{a}, {b}]")
    return rng.uniform(a, b, n)


def glorot_bound(fan_in: int, fan_out: int) -> float:
    """Uniform Glorot-Bengio limit sqrt(6 / (fan_in + fan_out))."""
    return float(np.sqrt(6.0 / (fan_in + fan_out)))
