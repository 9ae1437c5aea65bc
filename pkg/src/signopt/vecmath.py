"""Dense vector primitives, Holder-conjugate exponents, and seeded RNG streams.

Everything downstream (problems, optimizers, bound checks) goes through this
module for elementwise sign, norms, and sampling, so the sign(0) = +1
convention and the stream-splitting scheme are fixed here once.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConjugatePair",
    "RngStream",
    "sign_vec",
    "norm",
    "hadamard",
    "sample_uniform_cube",
    "sample_index",
    "sample_unit_sphere",
]

_VALID_Q = (1.0, 2.0, math.inf)


@dataclass(frozen=True)
class ConjugatePair:
    """Holder-conjugate exponent pair (q, p) with 1/p + 1/q = 1.

    Only q in {1, 2, inf} is constructible; p is derived, never stored
    independently, so the pair cannot go out of sync.
    """

    q: float

    def __post_init__(self) -> None:
        qf = float(self.q)
        if qf not in _VALID_Q:
            raise ValueError(f"q must be one of {{1, 2, inf}}, got {self.q!r}")
        object.__setattr__(self, "q", qf)

    @property
    def p(self) -> float:
        if self.q == 1.0:
            return math.inf
        if self.q == 2.0:
            return 2.0
        return 1.0

    def dim_root(self, d: int) -> float:
        """d ** (1/q): equals d, sqrt(d), 1 for q = 1, 2, inf."""
        return float(d) ** (1.0 / self.q)


def _derive_child_seed(seed: int, label: str) -> int:
    # Stable across platforms/processes: label splitting must not depend on
    # Python's randomized hash().
    h = hashlib.blake2b(f"{seed}:{label}".encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """Deterministic random stream keyed by a 64-bit seed.

    Backed by the Philox counter-based bit generator, which produces the same
    sequence on every platform for a given key. ``child(label)`` derives an
    independent stream from (seed, label) via a stable hash, so subsystems can
    split randomness without coordinating draw order.
    """

    __slots__ = ("seed", "generator")

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
        self.seed = int(seed) % (1 << 64)
        self.generator = np.random.Generator(np.random.Philox(key=self.seed))

    def child(self, label: str) -> "RngStream":
        return RngStream(_derive_child_seed(self.seed, label))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"


def sign_vec(v: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1, so the output is always in {-1, +1}."""
    return np.where(np.asarray(v) >= 0.0, 1.0, -1.0)


def norm(v: np.ndarray, p: float) -> float:
    """l_p norm for p in {1, 2, inf}. Empty vectors are rejected upstream."""
    v = np.asarray(v, dtype=np.float64)
    if p == 1:
        return float(np.abs(v).sum())
    if p == 2:
        return float(math.sqrt(v @ v))
    if p == math.inf:
        return float(np.abs(v).max()) if v.size else 0.0
    raise ValueError(f"p must be one of {{1, 2, inf}}, got {p!r}")


def hadamard(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    return u * v


def sample_uniform_cube(rng: RngStream, d: int) -> np.ndarray:
    """d i.i.d. coordinates uniform on [-1, 1]."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return rng.generator.uniform(-1.0, 1.0, size=d)


def sample_index(rng: RngStream, n: int) -> int:
    """Uniform integer in {1, ..., n}; Generator.integers is exactly uniform
    (no modulo bias)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return int(rng.generator.integers(1, n, endpoint=True))


def sample_unit_sphere(rng: RngStream, d: int) -> np.ndarray:
    """Uniform direction on the unit sphere: normalized standard Gaussian."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    while True:
        w = rng.generator.standard_normal(d)
        l2 = math.sqrt(w @ w)
        if l2 > 0.0:  # zero draw has probability ~0 but guard the division
            return w / l2
