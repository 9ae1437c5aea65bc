"""Single-step optimizers, step-size schedules, and the run loop.

Methods (all with constant step size gamma, sign(0) = +1 throughout):

  signsgd       x+ = x - gamma * sign(grad f_i(x))
  signsgd_plus  x+ = x - gamma * sign(grad f_i(x) + G_inf * U),
                U uniform on [-1,1]^d. The added noise makes the expected
                step direction equal to grad f(x) / G_inf coordinatewise, so
                the method inherits SGD-style guarantees that plain sign
                descent provably lacks.
  signgd        deterministic full-gradient sign step.
  signsvrg_v1/2 variance-reduced sign step with a trust radius D around a
                reference point: the sign is taken of
                grad f_i(x) - grad f_i(ref) + grad f(ref) + G_t (.) U
                where the noise amplitude G_t dominates the first three terms
                coordinatewise. Variant 1 uses the scalar amplitude
                L ||x - ref||_q + ||grad f(ref)||_p on every coordinate;
                variant 2 uses L ||x - ref||_q + |grad f(ref)^j| per
                coordinate. A candidate step is accepted only while it stays
                within l_q distance D of the reference; otherwise the iterate
                stands still and the reference is refreshed at x with a full
                gradient.
  sgd, svrg     unsigned baselines; svrg shares the radius-triggered
                reference logic and accounting, stepping along the
                variance-reduced gradient itself.

Randomness is consumed in a fixed order inside each step (component index
first, then the noise cube), and a rejected step still consumes its draws, so
traces are bitwise reproducible from (config, seed).

Communication accounting (bits): a sign step uploads d bits; an unsigned
stochastic gradient uploads d * float_bits; a reference refresh (and the
initial reference setup, and every full-gradient step of signgd) uploads
n * d * float_bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .problems import FiniteSumProblem
from .trace import FLAG_DEGENERATE, Trace
from .vecmath import ConjugatePair, RngStream, norm, sample_index, sample_uniform_cube, sign_vec

__all__ = [
    "SimpleState",
    "SignSVRGState",
    "StepReport",
    "RunSpec",
    "NonFiniteIterateError",
    "make_simple_state",
    "make_signsvrg_state",
    "step_signsgd",
    "step_signsgd_plus",
    "step_signgd",
    "step_sgd",
    "step_signsvrg",
    "step_svrg",
    "schedule_cor1",
    "schedule_cor2",
    "schedule_sec2",
    "run",
    "select_uniform_iterate",
    "average_iterates",
    "ALGORITHMS",
]

ALGORITHMS = ("signsgd", "signsgd_plus", "signgd", "sgd", "signsvrg_v1", "signsvrg_v2", "svrg")

_VR_ALGOS = ("signsvrg_v1", "signsvrg_v2", "svrg")


class NonFiniteIterateError(RuntimeError):
    """Raised when an iterate leaves the finite floats; carries the row index."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite iterate produced at iteration {iteration}")
        self.iteration = iteration


@dataclass(slots=True)
class SimpleState:
    """State of the reference-free methods."""

    x: np.ndarray
    t: int
    gamma: float


@dataclass(slots=True)
class SignSVRGState:
    """State of the radius-controlled variance-reduced methods.

    Invariant maintained by the steppers: ||x - ref||_q <= D at the start of
    every step, and ref_grad is exactly the full gradient at ref.
    """

    x: np.ndarray
    ref: np.ndarray
    ref_grad: np.ndarray
    k: int
    t: int
    gamma: float
    D: float
    L: float
    pair: ConjugatePair
    variant: int


@dataclass(slots=True)
class StepReport:
    """What a single variance-reduced step did, for trace accounting."""

    moved: bool
    ref_updated: bool
    g_vector: np.ndarray | None
    grad_evals_component: int
    grad_evals_full: int
    bits_sent: int
    degenerate: bool = False


def make_simple_state(x: np.ndarray, gamma: float, t: int = 1) -> SimpleState:
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.asarray(x, dtype=np.float64).copy()
    if x.ndim != 1:
        raise ValueError("x must be a vector")
    return SimpleState(x=x, t=t, gamma=gamma)


def make_signsvrg_state(
    x: np.ndarray,
    prob: FiniteSumProblem,
    gamma: float,
    D: float,
    L: float,
    q: float,
    variant: int,
) -> SignSVRGState:
    """Fresh state with ref = x and ref_grad = full gradient at x."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if D <= 0:
        raise ValueError(f"trust radius D must be positive, got {D}")
    if L <= 0:
        raise ValueError(f"smoothness constant L must be positive, got {L}")
    if variant not in (1, 2):
        raise ValueError(f"variant must be 1 or 2, got {variant}")
    x = np.asarray(x, dtype=np.float64).copy()
    return SignSVRGState(
        x=x,
        ref=x.copy(),
        ref_grad=prob.full_gradient(x),
        k=1,
        t=1,
        gamma=gamma,
        D=D,
        L=L,
        pair=ConjugatePair(q),
        variant=variant,
    )


def step_signsgd(state: SimpleState, prob: FiniteSumProblem, rng: RngStream) -> SimpleState:
    i = sample_index(rng, prob.n) - 1
    g = prob.component_gradient(i, state.x)
    return SimpleState(state.x - state.gamma * sign_vec(g), state.t + 1, state.gamma)


def step_signsgd_plus(
    state: SimpleState, prob: FiniteSumProblem, rng: RngStream, g_inf: float
) -> SimpleState:
    """Sign step on the noise-corrupted gradient g + g_inf * U.

    Requires g_inf >= ||grad f_i||_inf on the region visited; then each
    coordinate of the expected step is grad f(x)^j / g_inf.
    """
    if g_inf <= 0:
        raise ValueError(f"g_inf must be positive, got {g_inf}")
    i = sample_index(rng, prob.n) - 1
    u = sample_uniform_cube(rng, prob.d)
    g = prob.component_gradient(i, state.x)
    return SimpleState(state.x - state.gamma * sign_vec(g + g_inf * u), state.t + 1, state.gamma)


def step_signgd(state: SimpleState, prob: FiniteSumProblem) -> SimpleState:
    # at a stationary point sign(0) = +1 moves every coordinate by -gamma
    g = prob.full_gradient(state.x)
    return SimpleState(state.x - state.gamma * sign_vec(g), state.t + 1, state.gamma)


def step_sgd(state: SimpleState, prob: FiniteSumProblem, rng: RngStream) -> SimpleState:
    i = sample_index(rng, prob.n) - 1
    g = prob.component_gradient(i, state.x)
    return SimpleState(state.x - state.gamma * g, state.t + 1, state.gamma)


def _vr_gradient_and_amplitude(
    state: SignSVRGState, prob: FiniteSumProblem, i: int
) -> tuple[np.ndarray, np.ndarray]:
    """Variance-reduced gradient v and coordinatewise noise amplitude G_t."""
    v = (
        prob.component_gradient(i, state.x)
        - prob.component_gradient(i, state.ref)
        + state.ref_grad
    )
    drift = state.L * norm(state.x - state.ref, state.pair.q)
    if state.variant == 1:
        g_vec = np.full(len(v), drift + norm(state.ref_grad, state.pair.p))
    else:
        g_vec = drift + np.abs(state.ref_grad)
    # the amplitude must dominate the argument coordinatewise, else the
    # linearized-expectation identity behind the method breaks
    assert np.all(np.abs(v) <= g_vec + 1e-9 * (1.0 + np.abs(g_vec))), "noise amplitude violated"
    return v, g_vec


def _reject_update(state: SignSVRGState, prob: FiniteSumProblem) -> SignSVRGState:
    return SignSVRGState(
        x=state.x,
        ref=state.x,
        ref_grad=prob.full_gradient(state.x),
        k=state.k + 1,
        t=state.t + 1,
        gamma=state.gamma,
        D=state.D,
        L=state.L,
        pair=state.pair,
        variant=state.variant,
    )


def _accept_move(state: SignSVRGState, cand: np.ndarray) -> SignSVRGState:
    return SignSVRGState(
        x=cand,
        ref=state.ref,
        ref_grad=state.ref_grad,
        k=state.k,
        t=state.t + 1,
        gamma=state.gamma,
        D=state.D,
        L=state.L,
        pair=state.pair,
        variant=state.variant,
    )


def step_signsvrg(
    state: SignSVRGState,
    prob: FiniteSumProblem,
    rng: RngStream,
    float_bits: int = 32,
) -> tuple[SignSVRGState, StepReport]:
    """One step of the variance-reduced noisy sign method.

    Draws (i, U), forms the candidate
        x+ = x - gamma * sign(v + G_t (.) U),   v = grad f_i(x) - grad f_i(ref) + grad f(ref),
    and accepts it iff ||x+ - ref||_q <= D. On rejection the iterate is
    unchanged, the reference moves to x, and the full gradient is recomputed;
    the rejected draw is discarded (fresh randomness next step).
    """
    i = sample_index(rng, prob.n) - 1
    u = sample_uniform_cube(rng, prob.d)
    v, g_vec = _vr_gradient_and_amplitude(state, prob, i)
    degenerate = bool(np.any(g_vec == 0.0))
    cand = state.x - state.gamma * sign_vec(v + g_vec * u)
    if norm(cand - state.ref, state.pair.q) <= state.D:
        new = _accept_move(state, cand)
        report = StepReport(True, False, g_vec, 2, 0, len(cand), degenerate)
    else:
        new = _reject_update(state, prob)
        report = StepReport(
            False, True, g_vec, 2, 1, prob.n * prob.d * float_bits, degenerate
        )
    return new, report


def step_svrg(
    state: SignSVRGState,
    prob: FiniteSumProblem,
    rng: RngStream,
    float_bits: int = 32,
) -> tuple[SignSVRGState, StepReport]:
    """Unsigned baseline: same reference logic, step along v itself.

    E[v] = grad f(x) and ||v||_p <= L ||x - ref||_q + ||grad f(ref)||_p."""
    i = sample_index(rng, prob.n) - 1
    v = (
        prob.component_gradient(i, state.x)
        - prob.component_gradient(i, state.ref)
        + state.ref_grad
    )
    cand = state.x - state.gamma * v
    if norm(cand - state.ref, state.pair.q) <= state.D:
        new = _accept_move(state, cand)
        report = StepReport(True, False, None, 2, 0, len(cand) * float_bits)
    else:
        new = _reject_update(state, prob)
        report = StepReport(False, True, None, 2, 1, prob.n * prob.d * float_bits)
    return new, report


def schedule_cor1(d: int, q: float, L: float, T: int) -> tuple[float, Callable[[float], float]]:
    """Smoothness-scaled schedule for the nonconvex variance-reduced methods.

    gamma = d^{-1/q} sqrt(2/(L T)); the radius factory maps a reference
    period P to D = P sqrt(2/(L T)). With these choices a fresh reference
    cannot be rejected for at least P steps, since each sign step moves the
    iterate exactly gamma d^{1/q} in l_q distance.
    """
    if d < 1 or T < 1:
        raise ValueError(f"d and T must be >= 1, got d={d}, T={T}")
    if L <= 0:
        raise ValueError(f"L must be positive, got {L}")
    root = math.sqrt(2.0 / (L * T))
    gamma = root / ConjugatePair(q).dim_root(d)

    def d_factory(P: float) -> float:
        if P < 1:
            raise ValueError(f"reference period P must be >= 1, got {P}")
        return P * root

    return gamma, d_factory


def schedule_cor2(alpha: float, d: int, T: int) -> tuple[float, Callable[[float], float]]:
    """Distance-scaled schedule for the convex analysis: gamma = alpha/sqrt(dT),
    D = P/sqrt(T)."""
    if d < 1 or T < 1:
        raise ValueError(f"d and T must be >= 1, got d={d}, T={T}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    gamma = alpha / math.sqrt(d * T)

    def d_factory(P: float) -> float:
        if P < 1:
            raise ValueError(f"reference period P must be >= 1, got {P}")
        return P / math.sqrt(T)

    return gamma, d_factory


def schedule_sec2(dist_to_opt: float, d: int, T: int) -> float:
    """Step size dist/sqrt(dT) for the noise-corrupted sign method on convex
    Lipschitz problems."""
    if d < 1 or T < 1:
        raise ValueError(f"d and T must be >= 1, got d={d}, T={T}")
    if dist_to_opt <= 0:
        raise ValueError(f"dist_to_opt must be positive, got {dist_to_opt}")
    return dist_to_opt / math.sqrt(d * T)


@dataclass(frozen=True)
class RunSpec:
    """Everything run() needs besides the problem, horizon, and seed."""

    algo: str
    gamma: float
    x1: np.ndarray
    q: float = 1.0
    D: float | None = None
    L: float | None = None
    g_inf: float | None = None
    float_bits: int = 32
    keep_iterates: bool = False

    def __post_init__(self) -> None:
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algo {self.algo!r}; known: {ALGORITHMS}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.algo in _VR_ALGOS:
            if self.D is None or self.L is None:
                raise ValueError(f"{self.algo} requires both D and L")
        if self.algo == "signsgd_plus" and (self.g_inf is None or self.g_inf <= 0):
            raise ValueError("signsgd_plus requires a positive g_inf")
        if self.float_bits < 1:
            raise ValueError(f"float_bits must be >= 1, got {self.float_bits}")


def _norm_fn(q: float) -> Callable[[np.ndarray], float]:
    if q == 1:
        return lambda v: float(np.abs(v).sum())
    if q == 2:
        return lambda v: math.sqrt(v @ v)
    return lambda v: float(np.abs(v).max())


class _Columns:
    """Preallocated trace columns plus running accounting state."""

    def __init__(self, T: int, d: int, keep_iterates: bool):
        size = T + 1
        self.t = np.arange(1, size + 1, dtype=np.int64)
        self.f = np.empty(size)
        self.g1 = np.empty(size)
        self.g2 = np.empty(size)
        self.gi = np.empty(size)
        self.k = np.zeros(size, dtype=np.int64)
        self.dist = np.zeros(size)
        self.bits = np.zeros(size, dtype=np.int64)
        self.evals = np.zeros(size, dtype=np.int64)
        self.flags = np.zeros(size, dtype=np.int64)
        self.iterates = np.empty((T, d)) if keep_iterates else None
        self.x_sum = np.zeros(d)

    def snapshot(self, idx: int, prob: FiniteSumProblem, x: np.ndarray, bits: int, evals: int) -> None:
        fval, grad = prob.value_and_full_gradient(x)
        ag = np.abs(grad)
        self.f[idx] = fval
        self.g1[idx] = ag.sum()
        self.g2[idx] = math.sqrt(grad @ grad)
        self.gi[idx] = ag.max()
        self.bits[idx] = bits
        self.evals[idx] = evals


def _run_vr(spec: RunSpec, prob: FiniteSumProblem, T: int, rng: RngStream, cols: _Columns) -> np.ndarray:
    """Inner loop of the reference-point methods.

    Mirrors step_signsvrg / step_svrg exactly (same draws, same float
    operations) but carries ||x - ref||_q across iterations instead of
    recomputing it: the accepted candidate's radius check IS the next step's
    distance. Covered by a bitwise equivalence test against the public
    steppers.
    """
    n, d = prob.n, prob.d
    gamma, D, L = spec.gamma, spec.D, spec.L
    signed = spec.algo != "svrg"
    variant = 2 if spec.algo == "signsvrg_v2" else 1
    pair = ConjugatePair(spec.q)
    norm_q = _norm_fn(pair.q)
    norm_p = _norm_fn(pair.p)
    gen = rng.generator
    gen_integers = gen.integers
    gen_uniform = gen.uniform
    comp_grad = prob.component_gradient
    move_bits = d if signed else d * spec.float_bits
    sync_bits = n * d * spec.float_bits

    x = np.asarray(spec.x1, dtype=np.float64).copy()
    ref = x.copy()
    ref_grad = prob.full_gradient(x)
    abs_ref_grad = np.abs(ref_grad)
    ref_grad_p = norm_p(ref_grad)
    k = 1
    cur_dist = 0.0
    bits = sync_bits
    evals = n

    for idx in range(T):
        cols.snapshot(idx, prob, x, bits, evals)
        cols.k[idx] = k
        cols.dist[idx] = cur_dist
        if cols.iterates is not None:
            cols.iterates[idx] = x
        cols.x_sum += x

        i = int(gen_integers(1, n, endpoint=True)) - 1
        v = comp_grad(i, x) - comp_grad(i, ref) + ref_grad
        if signed:
            u = gen_uniform(-1.0, 1.0, d)
            drift = L * cur_dist
            if variant == 1:
                amp = drift + ref_grad_p
                if amp == 0.0:
                    cols.flags[idx] = FLAG_DEGENERATE
                assert np.abs(v).max() <= amp + 1e-9 * (1.0 + amp), "noise amplitude violated"
                arg = v + amp * u
            else:
                amp_vec = drift + abs_ref_grad
                if drift == 0.0 and np.any(abs_ref_grad == 0.0):
                    cols.flags[idx] = FLAG_DEGENERATE
                assert np.all(np.abs(v) <= amp_vec + 1e-9 * (1.0 + amp_vec)), "noise amplitude violated"
                arg = v + amp_vec * u
            cand = x - np.where(arg >= 0.0, gamma, -gamma)
        else:
            cand = x - gamma * v
        rad = norm_q(cand - ref)
        if rad <= D:
            x = cand
            cur_dist = rad
            bits += move_bits
            evals += 2
        else:
            ref = x
            ref_grad = prob.full_gradient(x)
            abs_ref_grad = np.abs(ref_grad)
            ref_grad_p = norm_p(ref_grad)
            k += 1
            cur_dist = 0.0
            bits += sync_bits
            evals += 2 + n
        if not np.all(np.isfinite(x)):
            raise NonFiniteIterateError(idx + 1)

    cols.snapshot(T, prob, x, bits, evals)
    cols.k[T] = k
    cols.dist[T] = cur_dist
    return x


def _run_simple(spec: RunSpec, prob: FiniteSumProblem, T: int, rng: RngStream, cols: _Columns) -> np.ndarray:
    n, d = prob.n, prob.d
    gamma = spec.gamma
    algo = spec.algo
    g_inf = spec.g_inf
    gen = rng.generator
    gen_integers = gen.integers
    gen_uniform = gen.uniform
    comp_grad = prob.component_gradient
    per_step_bits = {
        "signsgd": d,
        "signsgd_plus": d,
        "sgd": d * spec.float_bits,
        "signgd": n * d * spec.float_bits,
    }[algo]
    per_step_evals = n if algo == "signgd" else 1

    x = np.asarray(spec.x1, dtype=np.float64).copy()
    bits = 0
    evals = 0
    for idx in range(T):
        cols.snapshot(idx, prob, x, bits, evals)
        if cols.iterates is not None:
            cols.iterates[idx] = x
        cols.x_sum += x

        if algo == "signgd":
            g = prob.full_gradient(x)
            x = x - np.where(g >= 0.0, gamma, -gamma)
        else:
            i = int(gen_integers(1, n, endpoint=True)) - 1
            g = comp_grad(i, x)
            if algo == "signsgd":
                x = x - np.where(g >= 0.0, gamma, -gamma)
            elif algo == "signsgd_plus":
                u = gen_uniform(-1.0, 1.0, d)
                arg = g + g_inf * u
                x = x - np.where(arg >= 0.0, gamma, -gamma)
            else:  # sgd
                x = x - gamma * g
        bits += per_step_bits
        evals += per_step_evals
        if not np.all(np.isfinite(x)):
            raise NonFiniteIterateError(idx + 1)

    cols.snapshot(T, prob, x, bits, evals)
    return x


def run(spec: RunSpec, prob: FiniteSumProblem, T: int, seed: int) -> Trace:
    """Execute T iterations and record the trace (see trace module for the
    row conventions). Aborts with NonFiniteIterateError if the iterate leaves
    the finite floats."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    x1 = np.asarray(spec.x1, dtype=np.float64)
    if x1.ndim != 1 or x1.shape[0] != prob.d:
        raise ValueError(f"x1 must be a length-{prob.d} vector, got shape {x1.shape}")
    if not np.all(np.isfinite(x1)):
        raise ValueError("x1 must be finite")
    if spec.algo in _VR_ALGOS:
        # surface bad hyperparameters here rather than deep in the loop
        make_signsvrg_state(x1, prob, spec.gamma, spec.D, spec.L, spec.q,
                            2 if spec.algo == "signsvrg_v2" else 1)

    rng = RngStream(seed)
    cols = _Columns(T, prob.d, spec.keep_iterates)
    if spec.algo in _VR_ALGOS:
        x_final = _run_vr(spec, prob, T, rng, cols)
    else:
        x_final = _run_simple(spec, prob, T, rng, cols)

    meta = {
        "algo": spec.algo,
        "gamma": spec.gamma,
        "q": spec.q,
        "D": spec.D,
        "L": spec.L,
        "g_inf": spec.g_inf,
        "float_bits": spec.float_bits,
        "T": T,
        "seed": seed,
        "n": prob.n,
        "d": prob.d,
    }
    return Trace(
        t=cols.t,
        f=cols.f,
        gnorm1=cols.g1,
        gnorm2=cols.g2,
        gnorm_inf=cols.gi,
        k=cols.k,
        dist_to_ref=cols.dist,
        bits_cum=cols.bits,
        grad_evals_cum=cols.evals,
        flags=cols.flags,
        x1=x1.copy(),
        x_mean=cols.x_sum / T,
        x_final=x_final.copy(),
        iterates=cols.iterates,
        meta=meta,
    )


def select_uniform_iterate(trace: Trace, rng: RngStream) -> int:
    """Uniform iteration number in {1, ..., T}; the returned-point analyses
    are all stated for an iterate chosen this way."""
    return sample_index(rng, trace.T)


def average_iterates(trace: Trace) -> np.ndarray:
    """(1/T) sum of x_1..x_T, accumulated during the run."""
    return trace.x_mean.copy()
