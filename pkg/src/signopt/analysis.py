"""Evaluators that check convergence/accounting bounds on recorded traces.

Each evaluator computes the bound's two sides from traces (seed-averaged
where the claim is about expectations) and returns a BoundReport with

    holds  <=>  lhs <= rhs + tol,

where tol is 3 standard errors of the per-seed (lhs - rhs) gap for Monte
Carlo checks (floored at 1e-12) and an explicit small tolerance for
deterministic ones. Evaluators never mutate traces and raise on traces whose
recorded hyperparameters disagree with the arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problems import FiniteSumProblem
from .trace import Trace
from .vecmath import ConjugatePair, RngStream, norm, sample_unit_sphere

__all__ = [
    "BoundReport",
    "RateMetricsReport",
    "Example1Stats",
    "svrg_grad_bound_v1",
    "svrg_grad_bound_v2",
    "svrg_gap_bound",
    "regret_bound",
    "final_gap_bound",
    "signgd_bound",
    "rate_metrics",
    "update_count_bound",
    "comm_bits_bound",
    "opnorm_1_to_inf",
    "opnorm_2_to_2",
    "opnorm_inf_to_1",
    "example1_stats",
    "linf_constant_expected",
    "finite_diff_gradient",
]


@dataclass(frozen=True)
class BoundReport:
    name: str
    lhs: float
    rhs: float
    tol: float
    holds: bool
    n_seeds: int

    def as_dict(self) -> dict:
        # plain python scalars so json.dump never sees numpy types
        return {
            "name": self.name,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "tol": float(self.tol),
            "holds": bool(self.holds),
            "n_seeds": int(self.n_seeds),
        }


def _make_report(name: str, lhs_per_seed, rhs_per_seed, floor: float = 1e-12) -> BoundReport:
    lhs_arr = np.asarray(lhs_per_seed, dtype=np.float64)
    rhs_arr = np.asarray(rhs_per_seed, dtype=np.float64)
    n = len(lhs_arr)
    lhs = float(lhs_arr.mean())
    rhs = float(rhs_arr.mean())
    if n > 1:
        gap = lhs_arr - rhs_arr
        tol = max(floor, 3.0 * float(gap.std(ddof=1)) / math.sqrt(n))
    else:
        tol = floor
    return BoundReport(name, lhs, rhs, tol, lhs <= rhs + tol, n)


def _check_traces(traces: list[Trace], **expected) -> tuple[int, int]:
    """Validate a trace batch: nonempty, consistent meta, matching args.

    Returns (T, d). Raises ValueError on any mismatch."""
    if not traces:
        raise ValueError("need at least one trace")
    ref_meta = traces[0].meta
    for key in ("algo", "gamma", "D", "L", "q", "T", "d", "n"):
        vals = {tr.meta.get(key) for tr in traces}
        if len(vals) != 1:
            raise ValueError(f"traces disagree on {key}: {sorted(map(str, vals))}")
    for key, want in expected.items():
        if want is None:
            continue
        got = ref_meta.get(key)
        if got is None:
            continue
        if isinstance(want, float) or isinstance(got, float):
            if not math.isclose(float(got), float(want), rel_tol=1e-12, abs_tol=0.0):
                raise ValueError(f"traces were run with {key}={got}, evaluator got {want}")
        elif got != want:
            raise ValueError(f"traces were run with {key}={got}, evaluator got {want}")
    return int(ref_meta["T"]), int(ref_meta["d"])


def svrg_grad_bound_v1(
    traces: list[Trace], L: float, D: float, pair: ConjugatePair, gamma: float
) -> BoundReport:
    """Descent bound of the scalar-amplitude variance-reduced sign method:

    E[(1/T) sum_t ||grad f(x_t)||_2^2 / (2 L D + ||grad f(x_t)||_p)]
        <= E[f(x_1) - f(x_{T+1})]/(T gamma) + L gamma d^{2/q} / 2.
    """
    T, d = _check_traces(traces, gamma=gamma, D=D, L=L, q=pair.q)
    dim_sq = pair.dim_root(d) ** 2
    lhs, rhs = [], []
    for tr in traces:
        g2 = tr.gnorm2[:T]
        gp = tr.gnorm(pair.p)[:T]
        lhs.append(np.mean(g2 * g2 / (2.0 * L * D + gp)))
        rhs.append((tr.f[0] - tr.f[T]) / (T * gamma) + L * gamma * dim_sq / 2.0)
    return _make_report("svrg_grad_bound_v1", lhs, rhs)


def svrg_grad_bound_v2(
    traces: list[Trace], L: float, D: float, pair: ConjugatePair, gamma: float, d: int
) -> BoundReport:
    """Same rhs as variant 1; lhs uses the l_1 gradient norm against the
    coordinatewise amplitude: ||g||_1^2 / (2 L d D + ||g||_1)."""
    T, d_tr = _check_traces(traces, gamma=gamma, D=D, L=L, q=pair.q, d=d)
    dim_sq = pair.dim_root(d_tr) ** 2
    lhs, rhs = [], []
    for tr in traces:
        g1 = tr.gnorm1[:T]
        lhs.append(np.mean(g1 * g1 / (2.0 * L * d_tr * D + g1)))
        rhs.append((tr.f[0] - tr.f[T]) / (T * gamma) + L * gamma * dim_sq / 2.0)
    return _make_report("svrg_grad_bound_v2", lhs, rhs)


def svrg_gap_bound(
    traces: list[Trace],
    L: float,
    D: float,
    pair: ConjugatePair,
    gamma: float,
    d: int,
    f_star: float,
    x_star: np.ndarray,
) -> BoundReport:
    """Convex optimality-gap bound of the variance-reduced sign method:

    E[(1/T) sum_t (f(x_t) - f*) / (2 L D + sqrt(2 L (f(x_t) - f*)))]
        <= ||x_1 - x*||^2 / (2 T gamma) + gamma d / 2.
    """
    T, d_tr = _check_traces(traces, gamma=gamma, D=D, L=L, q=pair.q, d=d)
    lhs, rhs = [], []
    for tr in traces:
        gap = tr.f[:T] - f_star
        if np.any(gap < -1e-9):
            raise ValueError(
                f"trace value {tr.f[:T].min()} is below the claimed optimum {f_star}; "
                "corrupted data or wrong f_star"
            )
        gap = np.maximum(gap, 0.0)
        lhs.append(np.mean(gap / (2.0 * L * D + np.sqrt(2.0 * L * gap))))
        rhs.append(float(norm(tr.x1 - x_star, 2)) ** 2 / (2.0 * T * gamma) + gamma * d_tr / 2.0)
    return _make_report("svrg_gap_bound", lhs, rhs)


def regret_bound(
    traces: list[Trace],
    g_inf: float,
    gamma: float,
    d: int,
    f_star: float,
    x_star: np.ndarray,
) -> BoundReport:
    """Regret of the noise-corrupted sign method on convex Lipschitz problems:

    E[sum_t (f(x_t) - f*)] <= (G_inf / 2) (||x_1 - x*||^2 / gamma + gamma d T).
    """
    if g_inf <= 0:
        raise ValueError(f"g_inf must be positive, got {g_inf}")
    T, d_tr = _check_traces(traces, gamma=gamma, d=d)
    lhs, rhs = [], []
    for tr in traces:
        gap = tr.f[:T] - f_star
        if np.any(gap < -1e-9):
            raise ValueError(
                f"trace value {tr.f[:T].min()} is below the claimed optimum {f_star}"
            )
        lhs.append(float(gap.sum()))
        rhs.append(
            0.5 * g_inf * (float(norm(tr.x1 - x_star, 2)) ** 2 / gamma + gamma * d_tr * T)
        )
    return _make_report("regret_bound", lhs, rhs)


def final_gap_bound(
    traces: list[Trace],
    prob: FiniteSumProblem,
    g_inf: float,
    x_star: np.ndarray,
    f_star: float,
) -> BoundReport:
    """Gap of the averaged iterate under the tuned step gamma = dist/sqrt(dT):

    E[f(xbar_T) - f*] <= G_inf ||x_1 - x*||_2 sqrt(d / T).
    """
    if g_inf <= 0:
        raise ValueError(f"g_inf must be positive, got {g_inf}")
    T, d = _check_traces(traces)
    lhs, rhs = [], []
    for tr in traces:
        lhs.append(prob.value(tr.x_mean) - f_star)
        rhs.append(g_inf * float(norm(tr.x1 - x_star, 2)) * math.sqrt(d / T))
    return _make_report("final_gap_bound", lhs, rhs)


def signgd_bound(
    trace: Trace, L: float, pair: ConjugatePair, gamma: float, d: int, f_star: float
) -> BoundReport:
    """Deterministic full-gradient sign descent bound (single trace):

    (1/T) sum_t ||grad f(x_t)||_1 <= (f(x_1) - f*) / (T gamma) + L gamma d^{2/q} / 2,

    checked at relative tolerance 1e-8.
    """
    T, d_tr = _check_traces([trace], gamma=gamma, L=L, q=pair.q, d=d)
    lhs = float(np.mean(trace.gnorm1[:T]))
    rhs = (trace.f[0] - f_star) / (T * gamma) + L * gamma * pair.dim_root(d_tr) ** 2 / 2.0
    tol = 1e-8 * abs(rhs)
    return BoundReport("signgd_bound", lhs, float(rhs), tol, lhs <= rhs + tol, 1)


@dataclass(frozen=True)
class RateMetricsReport:
    """Scheduled-rate metrics of the variance-reduced sign methods.

    Gradient norms are seed-averages of time-averages, i.e. Monte Carlo
    estimates of E||grad f(x_out)|| at a uniformly selected iterate. The
    ratio bound uses a ratio of Monte Carlo means (not debiased); its tol is
    3 standard errors of the per-seed ratios.
    """

    grad_p_mean: float
    grad_2_mean: float
    grad_1_mean: float
    radius_bound: BoundReport  # E||grad f||_p <= 2 P sqrt(2L/T)  (= 2 L D)
    ratio_bound: BoundReport  # (E||g||_2)^2/E||g||_p <= d^{1/q}(f(x_1)-f*+1) sqrt(2L/T)
    v1_holds: bool
    v1_branch: str
    max_bound: BoundReport  # E||g||_1 <= sqrt(2L/T) max(d^{1/q}(f(x_1)-f*+1), 2 d P)

    def as_dict(self) -> dict:
        return {
            "grad_p_mean": self.grad_p_mean,
            "grad_2_mean": self.grad_2_mean,
            "grad_1_mean": self.grad_1_mean,
            "radius_bound": self.radius_bound.as_dict(),
            "ratio_bound": self.ratio_bound.as_dict(),
            "v1_holds": self.v1_holds,
            "v1_branch": self.v1_branch,
            "max_bound": self.max_bound.as_dict(),
        }


def rate_metrics(
    traces: list[Trace],
    pair: ConjugatePair,
    D: float,
    L: float,
    d: int,
    T: int,
    f_star: float,
) -> RateMetricsReport:
    """Rate bounds under the smoothness-scaled schedule, where the radius
    satisfies D = P sqrt(2/(L T)) for reference period P."""
    T_tr, d_tr = _check_traces(traces, D=D, L=L, q=pair.q, d=d, T=T)
    P = D * math.sqrt(L * T / 2.0)
    rate = math.sqrt(2.0 * L / T)
    per_p = np.array([float(np.mean(tr.gnorm(pair.p)[:T])) for tr in traces])
    per_2 = np.array([float(np.mean(tr.gnorm2[:T])) for tr in traces])
    per_1 = np.array([float(np.mean(tr.gnorm1[:T])) for tr in traces])
    f_x1 = float(np.mean([tr.f[0] for tr in traces]))
    descent_rhs = pair.dim_root(d) * (f_x1 - f_star + 1.0) * rate

    radius = _make_report("rate_radius_branch", per_p, np.full(len(traces), 2.0 * P * rate))
    per_ratio = per_2**2 / per_p
    ratio = _make_report("rate_ratio_branch", per_ratio, np.full(len(traces), descent_rhs))
    v1_holds = radius.holds or ratio.holds
    v1_branch = "radius" if radius.holds else ("ratio" if ratio.holds else "none")
    v2_rhs = rate * max(pair.dim_root(d) * (f_x1 - f_star + 1.0), 2.0 * d * P)
    max_b = _make_report("rate_max_bound", per_1, np.full(len(traces), v2_rhs))
    return RateMetricsReport(
        grad_p_mean=float(per_p.mean()),
        grad_2_mean=float(per_2.mean()),
        grad_1_mean=float(per_1.mean()),
        radius_bound=radius,
        ratio_bound=ratio,
        v1_holds=v1_holds,
        v1_branch=v1_branch,
        max_bound=max_b,
    )


def update_count_bound(trace: Trace, P: float) -> BoundReport:
    """Reference refreshes are rare: k(T) <= ceil(T / P), exactly (tol 0)."""
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    T = trace.T
    lhs = float(trace.k[T - 1])
    rhs = float(math.ceil(T / P))
    return BoundReport("update_count_bound", lhs, rhs, 0.0, lhs <= rhs, 1)


def comm_bits_bound(trace: Trace, float_bits: int, n: int, d: int, P: float) -> BoundReport:
    """Communication after T iterations: bits_cum(T) <= d (F n + P - 1) ceil(T/P).

    The worst case packs one reference sync (n d F bits) plus P - 1 sign
    vectors (d bits each) into every period of P iterations; the initial
    sync occupies the first period's sync slot.
    """
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    _check_traces([trace], float_bits=float_bits, n=n, d=d)
    T = trace.T
    lhs = float(trace.bits_cum[T - 1])
    rhs = float(d * (float_bits * n + P - 1) * math.ceil(T / P))
    return BoundReport("comm_bits_bound", lhs, rhs, 0.0, lhs <= rhs, 1)


def opnorm_1_to_inf(m: np.ndarray) -> float:
    """||M||_{1->inf} = max_{j,k} |M_{jk}|."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.abs(m).max())


def opnorm_2_to_2(m: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Spectral norm via power iteration on M^T M with a deterministic start.

    Exact in one pass on rank-one inputs (the Gram matrix maps every vector
    into the top eigenspace). Raises ArithmeticError if the Rayleigh estimate
    has not stabilized to relative tolerance within max_iter sweeps.
    """
    m = np.asarray(m, dtype=np.float64)
    gram = m.T @ m
    d = gram.shape[0]
    # generic start: strictly positive, non-constant, no special symmetry
    v = 1.0 + np.arange(1, d + 1) / (2.0 * d)
    v /= math.sqrt(v @ v)
    sigma_prev = -1.0
    for _ in range(max_iter):
        w = gram @ v
        wn = math.sqrt(w @ w)
        if wn == 0.0:
            return 0.0  # v in the kernel and Gram-invariant: the norm is 0
        v = w / wn
        sigma = math.sqrt(max(0.0, float(v @ (gram @ v))))
        if abs(sigma - sigma_prev) <= tol * max(sigma, 1.0e-30):
            return sigma
        sigma_prev = sigma
    raise ArithmeticError(
        f"power iteration did not stabilize: last estimate {sigma_prev}, "
        f"residual {abs(sigma - sigma_prev)}"
    )


def _rank_one_factor(m: np.ndarray, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray] | None:
    """Return (u, v) with M = u v^T if M is numerically rank one, else None."""
    m = np.asarray(m, dtype=np.float64)
    col_norms = np.abs(m).sum(axis=0)
    j = int(np.argmax(col_norms))
    if col_norms[j] == 0.0:
        return np.zeros(m.shape[0]), np.zeros(m.shape[1])
    u = m[:, j]
    # coefficients of each column along u
    coeff = (u @ m) / (u @ u)
    if np.abs(m - np.outer(u, coeff)).max() > rtol * max(1.0, np.abs(m).max()):
        return None
    return u, coeff


def opnorm_inf_to_1(m: np.ndarray, max_dim: int = 20) -> float | None:
    """||M||_{inf->1} = max over sign vectors s of ||M s||_1.

    Rank-one inputs use the closed form ||u||_1 ||v||_1 in any dimension;
    otherwise the sign vertices are enumerated for d <= max_dim. Returns None
    when neither route applies (the norm is NP-hard in general).
    """
    m = np.asarray(m, dtype=np.float64)
    factor = _rank_one_factor(m)
    if factor is not None:
        u, v = factor
        return float(np.abs(u).sum() * np.abs(v).sum())
    d = m.shape[1]
    if d > max_dim:
        return None
    best = 0.0
    # enumerate half the hypercube; s and -s give the same value
    for bits in range(1 << (d - 1)):
        s = np.empty(d)
        s[0] = 1.0
        for j in range(1, d):
            s[j] = 1.0 if (bits >> (j - 1)) & 1 else -1.0
        best = max(best, float(np.abs(m @ s).sum()))
    return best


@dataclass(frozen=True)
class Example1Stats:
    """Per-sample smoothness constants of f(x) = (zeta^T x)^2 / 2 for random
    unit directions zeta: l1 = ||zeta||_inf^2, l2 = ||zeta||_2^2 (spectral
    norm of the rank-one Hessian, always 1), linf = ||zeta||_1^2."""

    d: int
    l1: np.ndarray
    l2: np.ndarray
    linf: np.ndarray

    @property
    def mean_l1(self) -> float:
        return float(self.l1.mean())

    @property
    def mean_linf(self) -> float:
        return float(self.linf.mean())

    def stderr_linf(self) -> float:
        return float(self.linf.std(ddof=1) / math.sqrt(len(self.linf)))


def linf_constant_expected(d: int) -> float:
    """Exact E[||zeta||_1^2] for zeta uniform on the unit sphere in R^d:
    (1 - 2/pi) + (2/pi) d."""
    return (1.0 - 2.0 / math.pi) + (2.0 / math.pi) * d


def example1_stats(d: int, n_samples: int, rng: RngStream) -> Example1Stats:
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    l1 = np.empty(n_samples)
    l2 = np.empty(n_samples)
    linf = np.empty(n_samples)
    for s in range(n_samples):
        z = sample_unit_sphere(rng, d)
        az = np.abs(z)
        l1[s] = az.max() ** 2
        l2[s] = float(z @ z)
        linf[s] = az.sum() ** 2
    return Example1Stats(d=d, l1=l1, l2=l2, linf=linf)


def finite_diff_gradient(prob: FiniteSumProblem, i: int, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of component i with per-coordinate step
    h * (1 + |x_j|)."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for j in range(len(x)):
        hj = h * (1.0 + abs(float(x[j])))
        e = np.zeros_like(x)
        e[j] = hj
        g[j] = (prob.component_value(i, x + e) - prob.component_value(i, x - e)) / (2.0 * hj)
    return g
