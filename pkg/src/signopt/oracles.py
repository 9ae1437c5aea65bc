"""Independent oracles used to cross-check the main implementation.

Nothing here shares code with problems/optimizers/analysis: norms are
re-derived by brute force, expectations by direct integration or Monte Carlo,
dynamics by closed-form recursions. Tests compare the two routes.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .vecmath import RngStream

__all__ = [
    "expected_sign_analytic",
    "monte_carlo_expected_sign",
    "counterexample_drift",
    "brute_force_opnorm",
    "signgd_1d_closed_form",
]

# slopes of the three linear-plus-quadratic components in the drift instance
_DRIFT_SLOPES = (-3.0, 1.0, 1.0)


def expected_sign_analytic(g: float, G: float) -> float:
    """E[sign(g + G*U)] for U uniform on [-1, 1].

    Equals g/G when |g| <= G (the noise linearizes the sign), and saturates at
    +-1 when the noise amplitude cannot flip the sign.
    """
    if G <= 0:
        raise ValueError(f"noise amplitude G must be positive, got {G}")
    return float(np.clip(g / G, -1.0, 1.0))


def monte_carlo_expected_sign(
    g: float, G: float, n_samples: int, rng: RngStream
) -> tuple[float, float]:
    """Monte Carlo estimate of E[sign(g + G*U)]; returns (mean, stderr)."""
    if G <= 0:
        raise ValueError(f"noise amplitude G must be positive, got {G}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    u = rng.generator.uniform(-1.0, 1.0, size=n_samples)
    s = np.where(g + G * u >= 0.0, 1.0, -1.0)
    mean = float(s.mean())
    stderr = float(s.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return mean, stderr


def counterexample_drift(x: float) -> float:
    """Mean of sign(x + a_i) over the slopes a = (-3, 1, 1), sign(0) = +1.

    This is the expected descent direction (up to the -gamma factor) of
    stochastic sign descent on the instance f_i(x) = a_i x + x^2/2. It is +1/3
    on (-1, 3), so the method drifts away from the optimum x* = 1/3.
    """
    total = 0.0
    for a in _DRIFT_SLOPES:
        total += 1.0 if x + a >= 0.0 else -1.0
    return total / len(_DRIFT_SLOPES)


def _jacobi_spectral_norm(m: np.ndarray) -> float:
    """Largest singular value via cyclic Jacobi on the Gram matrix M^T M."""
    a = m.T @ m
    d = a.shape[0]
    for _ in range(100 * d * d + 100):
        # largest off-diagonal pivot
        off = np.abs(a - np.diag(np.diag(a)))
        i, j = np.unravel_index(np.argmax(off), off.shape)
        if off[i, j] <= 1e-14 * max(1.0, np.abs(np.diag(a)).max()):
            break
        # 2x2 symmetric rotation annihilating a[i, j]
        theta = 0.5 * math.atan2(2.0 * a[i, j], a[i, i] - a[j, j])
        c, s = math.cos(theta), math.sin(theta)
        rot = np.eye(d)
        rot[i, i] = c
        rot[j, j] = c
        rot[i, j] = -s
        rot[j, i] = s
        a = rot.T @ a @ rot
        a = 0.5 * (a + a.T)  # keep symmetric against roundoff
    lam = max(0.0, float(np.diag(a).max()))
    return math.sqrt(lam)


def brute_force_opnorm(m: np.ndarray, q: float) -> float:
    """Operator norm of M from l_q to its Holder conjugate, by enumeration.

    q=1: maximize over the l_1 ball's extreme points (+-e_k), i.e. columns.
    q=inf: maximize ||M s||_1 over all sign vectors s in {-1, +1}^d.
    q=2: largest singular value via a self-contained Jacobi eigensolver.
    Refuses d > 12; this is a test oracle, not a production routine.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    d = m.shape[1]
    if d > 12 or m.shape[0] > 12:
        raise ValueError(f"brute-force oracle limited to d <= 12, got {m.shape}")
    if q == 1:
        best = 0.0
        for k in range(d):  # columns of M are the images of the extreme points
            best = max(best, float(np.abs(m[:, k]).max()))
        return best
    if q == math.inf:
        best = 0.0
        for signs in itertools.product((-1.0, 1.0), repeat=d):
            best = max(best, float(np.abs(m @ np.array(signs)).sum()))
        return best
    if q == 2:
        return _jacobi_spectral_norm(m)
    raise ValueError(f"q must be one of {{1, 2, inf}}, got {q!r}")


def signgd_1d_closed_form(x1: float, gamma: float, T: int) -> np.ndarray:
    """|x_t| for t = 1..T under the scalar recursion |x_{t+1}| = ||x_t| - gamma|.

    This is the exact absolute-value trajectory of full-gradient sign descent
    on f(x) = x^2/2: the step is always +-gamma, so |x| decreases by gamma
    until it lands within [0, gamma) and then oscillates forever. In
    particular max(|x_t|, |x_{t+1}|) >= gamma/2 for all t, so no linear rate
    is possible.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    out = np.empty(T)
    a = abs(x1)
    for t in range(T):
        out[t] = a
        a = abs(a - gamma)
    return out
