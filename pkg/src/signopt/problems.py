"""Finite-sum benchmark problems f(x) = (1/n) sum_i f_i(x).

Each problem exposes component values/gradients (0-based index i), the exact
full gradient, and analytic smoothness constants L_q measured in the operator
norm from l_q to its Holder conjugate l_p:

    || grad f_i(x) - grad f_i(y) ||_p <= L_q ||x - y||_q.

For rank-one Hessians a a^T this norm is ||a||_p^2, which is where the
closed-form constants below come from. Methods return None where a quantity
genuinely does not exist or is not known in closed form (e.g. smoothness of
the absolute-loss model).
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .vecmath import ConjugatePair, RngStream, norm

__all__ = [
    "FiniteSumProblem",
    "ProblemSpec",
    "LeastSquaresProblem",
    "LogisticProblem",
    "TrigProblem",
    "AbsRegressionProblem",
    "SphereQuadraticProblem",
    "CounterexampleProblem",
    "make_problem",
    "estimate_lipschitz_empirical",
    "numeric_f_star",
    "PROBLEM_KINDS",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class FiniteSumProblem(ABC):
    """Contract shared by all problems. Component index i is 0-based."""

    n: int
    d: int

    @abstractmethod
    def component_value(self, i: int, x: np.ndarray) -> float: ...

    @abstractmethod
    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def value(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def full_gradient(self, x: np.ndarray) -> np.ndarray: ...

    def value_and_full_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        """Both at once; hot problems override to share the residual."""
        return self.value(x), self.full_gradient(x)

    def lipschitz_constant(self, q: float) -> float | None:
        """Analytic L_q valid for every component (and hence for f), or None."""
        return None

    def grad_bound_inf(self) -> float | None:
        """Global bound on ||grad f_i||_inf over all i and x, or None."""
        return None

    def optimum(self) -> tuple[np.ndarray, float] | None:
        """(x*, f*) when known in closed form, else None."""
        return None

    def f_lower_bound(self) -> float | None:
        """A valid lower bound on f; defaults to f* when the optimum is known."""
        opt = self.optimum()
        return opt[1] if opt is not None else None


@dataclass(frozen=True)
class ProblemSpec:
    """Serializable recipe for a generated problem instance.

    Identical specs always produce bitwise-identical data: rows, planted
    targets, and label noise all come from labeled children of
    RngStream(seed).
    """

    kind: str
    d: int
    n: int
    seed: int
    lam: float = 0.0
    label_noise: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.d < 1 or self.n < 1:
            raise ValueError(f"d and n must be >= 1, got d={self.d}, n={self.n}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 <= self.label_noise <= 1.0:
            raise ValueError(f"label_noise must be in [0, 1], got {self.label_noise}")


def _gaussian_rows(spec: ProblemSpec) -> np.ndarray:
    # rows scaled by 1/sqrt(d) so ||a_i||_2 is O(1) regardless of dimension
    gen = RngStream(spec.seed).child("rows").generator
    return gen.standard_normal((spec.n, spec.d)) / math.sqrt(spec.d)


def _row_norm_sq_max(a: np.ndarray, q: float) -> float:
    p = ConjugatePair(q).p
    return max(norm(a[i], p) ** 2 for i in range(a.shape[0]))


class LeastSquaresProblem(FiniteSumProblem):
    """f_i(x) = (a_i^T x - b_i)^2 / 2. Hessian of f_i is a_i a_i^T."""

    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.a = _frozen(np.atleast_2d(a))
        self.b = _frozen(np.atleast_1d(b))
        if self.a.shape[0] != self.b.shape[0]:
            raise ValueError("row/target count mismatch")
        self.n, self.d = self.a.shape

    def component_value(self, i: int, x: np.ndarray) -> float:
        return 0.5 * float(self.a[i] @ x - self.b[i]) ** 2

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return (self.a[i] @ x - self.b[i]) * self.a[i]

    def value(self, x: np.ndarray) -> float:
        r = self.a @ x - self.b
        return 0.5 * float(r @ r) / self.n

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.a.T @ (self.a @ x - self.b) / self.n

    def value_and_full_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        r = self.a @ x - self.b
        return 0.5 * float(r @ r) / self.n, self.a.T @ r / self.n

    def lipschitz_constant(self, q: float) -> float:
        return _row_norm_sq_max(self.a, q)

    def optimum(self) -> tuple[np.ndarray, float]:
        # minimum-norm least-squares solution covers the rank-deficient case
        x_star, *_ = np.linalg.lstsq(self.a, self.b, rcond=None)
        return x_star, self.value(x_star)


class LogisticProblem(FiniteSumProblem):
    """f_i(x) = log(1 + exp(-y_i a_i^T x)) with labels y_i in {-1, +1}."""

    def __init__(self, a: np.ndarray, y: np.ndarray):
        self.a = _frozen(np.atleast_2d(a))
        self.y = _frozen(np.atleast_1d(y))
        if self.a.shape[0] != self.y.shape[0]:
            raise ValueError("row/label count mismatch")
        if not np.all(np.abs(self.y) == 1.0):
            raise ValueError("labels must be +-1")
        self.n, self.d = self.a.shape

    @staticmethod
    def _sigmoid(z: np.ndarray) -> np.ndarray:
        # numerically stable on both tails
        out = np.empty_like(z, dtype=np.float64)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def component_value(self, i: int, x: np.ndarray) -> float:
        return float(np.logaddexp(0.0, -self.y[i] * (self.a[i] @ x)))

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        z = self.y[i] * (self.a[i] @ x)
        return -self.y[i] * self._sigmoid(np.asarray(-z)) * self.a[i]

    def value(self, x: np.ndarray) -> float:
        z = self.y * (self.a @ x)
        return float(np.logaddexp(0.0, -z).mean())

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        z = self.y * (self.a @ x)
        return -(self.a.T @ (self.y * self._sigmoid(-z))) / self.n

    def lipschitz_constant(self, q: float) -> float:
        # logistic curvature is at most 1/4
        return 0.25 * _row_norm_sq_max(self.a, q)


class TrigProblem(FiniteSumProblem):
    """f_i(x) = cos(a_i^T x) + (lam/2) ||x||_2^2: bounded nonconvex test."""

    def __init__(self, a: np.ndarray, lam: float = 0.0):
        self.a = _frozen(np.atleast_2d(a))
        if lam < 0:
            raise ValueError("lam must be >= 0")
        self.lam = float(lam)
        self.n, self.d = self.a.shape

    def component_value(self, i: int, x: np.ndarray) -> float:
        return float(np.cos(self.a[i] @ x)) + 0.5 * self.lam * float(x @ x)

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return -math.sin(self.a[i] @ x) * self.a[i] + self.lam * x

    def value(self, x: np.ndarray) -> float:
        return float(np.cos(self.a @ x).mean()) + 0.5 * self.lam * float(x @ x)

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return -(self.a.T @ np.sin(self.a @ x)) / self.n + self.lam * x

    def value_and_full_gradient(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        z = self.a @ x
        val = float(np.cos(z).mean()) + 0.5 * self.lam * float(x @ x)
        return val, -(self.a.T @ np.sin(z)) / self.n + self.lam * x

    def lipschitz_constant(self, q: float) -> float:
        # Hessian of the ridge term is lam*I; ||I||_{q->p} is 1, 1, d
        identity_norm = {1.0: 1.0, 2.0: 1.0, math.inf: float(self.d)}[ConjugatePair(q).q]
        return _row_norm_sq_max(self.a, q) + self.lam * identity_norm

    def f_lower_bound(self) -> float:
        return -1.0  # cos >= -1 and the ridge term is nonnegative


class AbsRegressionProblem(FiniteSumProblem):
    """f_i(x) = |a_i^T x - b_i|: convex, nonsmooth, bounded subgradients.

    component_gradient returns the subgradient sign(a_i^T x - b_i) * a_i with
    sign(0) = +1. When constructed with a planted point (b = A x0) the optimum
    (x0, 0) is exposed.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, planted: np.ndarray | None = None):
        self.a = _frozen(np.atleast_2d(a))
        self.b = _frozen(np.atleast_1d(b))
        if self.a.shape[0] != self.b.shape[0]:
            raise ValueError("row/target count mismatch")
        self.n, self.d = self.a.shape
        self._planted = None if planted is None else _frozen(planted)
        if self._planted is not None:
            if not np.allclose(self.a @ self._planted, self.b, atol=1e-12):
                raise ValueError("planted point does not interpolate the targets")

    def component_value(self, i: int, x: np.ndarray) -> float:
        return abs(float(self.a[i] @ x - self.b[i]))

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        r = float(self.a[i] @ x - self.b[i])
        return self.a[i] if r >= 0.0 else -self.a[i]

    def value(self, x: np.ndarray) -> float:
        return float(np.abs(self.a @ x - self.b).mean())

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        r = self.a @ x - self.b
        return self.a.T @ np.where(r >= 0.0, 1.0, -1.0) / self.n

    def grad_bound_inf(self) -> float:
        return float(np.abs(self.a).max())

    def optimum(self) -> tuple[np.ndarray, float] | None:
        if self._planted is None:
            return None
        return self._planted, 0.0


class SphereQuadraticProblem(FiniteSumProblem):
    """Single-component f(x) = (zeta^T x)^2 / 2 with ||zeta||_2 = 1.

    The Hessian is the rank-one projector zeta zeta^T, so every smoothness
    constant is exact: L_q = ||zeta||_p^2, and in particular L_2 = 1.
    """

    def __init__(self, zeta: np.ndarray):
        self.zeta = _frozen(zeta)
        if abs(norm(self.zeta, 2) - 1.0) > 1e-9:
            raise ValueError("zeta must be a unit vector")
        self.n, self.d = 1, self.zeta.shape[0]

    def component_value(self, i: int, x: np.ndarray) -> float:
        return 0.5 * float(self.zeta @ x) ** 2

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return float(self.zeta @ x) * self.zeta

    def value(self, x: np.ndarray) -> float:
        return self.component_value(0, x)

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.component_gradient(0, x)

    def lipschitz_constant(self, q: float) -> float:
        return norm(self.zeta, ConjugatePair(q).p) ** 2

    def optimum(self) -> tuple[np.ndarray, float]:
        return np.zeros(self.d), 0.0


class CounterexampleProblem(FiniteSumProblem):
    """d=1, n=3 instance on which plain stochastic sign descent fails.

    f_i(x) = a_i x + x^2/2 with a = (-3, 1, 1), so f(x) = -x/3 + x^2/2 with
    optimum x* = 1/3, yet the majority of component gradient signs points
    away from x* everywhere on (-1, 3).
    """

    slopes = (-3.0, 1.0, 1.0)

    def __init__(self) -> None:
        self.n, self.d = 3, 1
        self._mean_slope = sum(self.slopes) / 3.0  # -1/3

    def component_value(self, i: int, x: np.ndarray) -> float:
        xv = float(x[0])
        return self.slopes[i] * xv + 0.5 * xv * xv

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return np.array([self.slopes[i] + float(x[0])])

    def value(self, x: np.ndarray) -> float:
        xv = float(x[0])
        return self._mean_slope * xv + 0.5 * xv * xv

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return np.array([float(x[0]) + self._mean_slope])

    def lipschitz_constant(self, q: float) -> float:
        ConjugatePair(q)  # validate q
        return 1.0  # Hessian is the 1x1 identity in every operator norm

    def optimum(self) -> tuple[np.ndarray, float]:
        return np.array([1.0 / 3.0]), -1.0 / 18.0


def _make_least_squares(spec: ProblemSpec) -> LeastSquaresProblem:
    a = _gaussian_rows(spec)
    target = RngStream(spec.seed).child("target").generator.standard_normal(spec.d)
    noise = RngStream(spec.seed).child("noise").generator.standard_normal(spec.n)
    return LeastSquaresProblem(a, a @ target + 0.1 * noise)


def _make_logistic(spec: ProblemSpec) -> LogisticProblem:
    a = _gaussian_rows(spec)
    target = RngStream(spec.seed).child("target").generator.standard_normal(spec.d)
    y = np.where(a @ target >= 0.0, 1.0, -1.0)
    if spec.label_noise > 0.0:
        flips = RngStream(spec.seed).child("labels").generator.uniform(size=spec.n)
        y = np.where(flips < spec.label_noise, -y, y)
    return LogisticProblem(a, y)


def _make_trig(spec: ProblemSpec) -> TrigProblem:
    return TrigProblem(_gaussian_rows(spec), lam=spec.lam)


def _make_abs_regression(spec: ProblemSpec) -> AbsRegressionProblem:
    a = _gaussian_rows(spec)
    planted = RngStream(spec.seed).child("target").generator.standard_normal(spec.d)
    return AbsRegressionProblem(a, a @ planted, planted=planted)


def _make_sphere_quadratic(spec: ProblemSpec) -> SphereQuadraticProblem:
    if spec.n != 1:
        raise ValueError("sphere_quadratic is a single-component problem, need n=1")
    from .vecmath import sample_unit_sphere

    return SphereQuadraticProblem(sample_unit_sphere(RngStream(spec.seed).child("rows"), spec.d))


def _make_counterexample(spec: ProblemSpec) -> CounterexampleProblem:
    if spec.d != 1 or spec.n != 3:
        raise ValueError("counterexample is fixed at d=1, n=3")
    return CounterexampleProblem()


PROBLEM_KINDS = {
    "least_squares": _make_least_squares,
    "logistic": _make_logistic,
    "trig_nonconvex": _make_trig,
    "abs_regression": _make_abs_regression,
    "sphere_quadratic": _make_sphere_quadratic,
    "counterexample": _make_counterexample,
}


def make_problem(spec: ProblemSpec) -> FiniteSumProblem:
    return PROBLEM_KINDS[spec.kind](spec)


def estimate_lipschitz_empirical(
    prob: FiniteSumProblem, q: float, rng: RngStream, trials: int
) -> float:
    """Empirical lower estimate of L_q: max over sampled (i, x, y) of the
    gradient-difference ratio. Never exceeds the analytic constant."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    pair = ConjugatePair(q)
    gen = rng.generator
    best = 0.0
    for _ in range(trials):
        i = int(gen.integers(0, prob.n))
        x = gen.standard_normal(prob.d)
        # mix global and local probes; curvature may vary across scales
        y = x + gen.standard_normal(prob.d) * float(gen.choice([1.0, 1e-3]))
        denom = norm(x - y, q)
        if denom == 0.0:
            continue
        num = norm(prob.component_gradient(i, x) - prob.component_gradient(i, y), pair.p)
        best = max(best, num / denom)
    return best


def numeric_f_star(prob: FiniteSumProblem, iters: int = 20000) -> float:
    """Surrogate optimal value via deterministic gradient descent.

    For problems without a closed-form optimum (e.g. logistic). Uses step
    1/L_2 when available, else a conservative line-search-free step. Returns
    the best value seen; deterministic for a given problem.
    """
    l2 = prob.lipschitz_constant(2.0)
    step = 1.0 / l2 if l2 else 1e-2
    x = np.zeros(prob.d)
    best = prob.value(x)
    for _ in range(iters):
        x = x - step * prob.full_gradient(x)
        best = min(best, prob.value(x))
    return best
