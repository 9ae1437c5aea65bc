"""Experiment configuration, execution, and summary emission.

A JSON config fully determines an experiment: problem recipe, algorithm,
schedule, horizon, seed list, start point, and the list of bound checks to
evaluate on the recorded traces. Outputs: one trace CSV per seed plus a
summary.json whose bytes depend only on the config (wall-clock timing goes to
a separate timing.json so the deterministic artifacts stay byte-identical
across reruns).

Config schema (see README for the prose version):

    {
      "problem": {"kind": str, "d": int, "n": int, "seed": int,
                   "lam": float?, "label_noise": float?},
      "algo": "signsgd"|"signsgd_plus"|"signgd"|"sgd"
              |"signsvrg_v1"|"signsvrg_v2"|"svrg",
      "schedule": "cor1"|"cor2"|"sec2"|"manual",
      "q": 1|2|"inf",
      "T": int,
      "seeds": [int, ...],          # distinct
      "x1": "zeros"|{"gaussian": scale}|[floats],
      "P": float?,                  # reference period; default F*n
      "alpha": float?,              # cor2/sec2 distance; default ||x1 - x*||
      "gamma": float?, "D": float?, # manual schedule only
      "g_inf": float?,              # override for signsgd_plus
      "F": int?,                    # bits per float, default 32
      "checks": [str, ...]
    }
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .analysis import (
    BoundReport,
    comm_bits_bound,
    final_gap_bound,
    rate_metrics,
    regret_bound,
    signgd_bound,
    svrg_gap_bound,
    svrg_grad_bound_v1,
    svrg_grad_bound_v2,
    update_count_bound,
)
from .optimizers import (
    ALGORITHMS,
    RunSpec,
    run,
    schedule_cor1,
    schedule_cor2,
    schedule_sec2,
)
from .problems import FiniteSumProblem, ProblemSpec, make_problem, numeric_f_star
from .trace import Trace
from .vecmath import ConjugatePair, RngStream, norm

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "load_config",
    "config_from_dict",
    "execute_experiment",
    "CHECKS",
    "SCHEDULES",
]

SCHEDULES = ("cor1", "cor2", "sec2", "manual")

# which algorithms each schedule rule may drive
_SCHEDULE_ALGOS = {
    "cor1": {"signsvrg_v1", "signsvrg_v2", "svrg", "signgd"},
    "cor2": {"signsvrg_v1"},
    "sec2": {"signsgd_plus"},
    "manual": set(ALGORITHMS),
}

_VR_ALGOS = {"signsvrg_v1", "signsvrg_v2", "svrg"}

# check name -> algorithms it applies to (None = any)
CHECKS = {
    "svrg_grad_bound_v1": {"signsvrg_v1"},
    "svrg_grad_bound_v2": {"signsvrg_v2"},
    "svrg_gap_bound": {"signsvrg_v1"},
    "regret_bound": {"signsgd_plus"},
    "final_gap_bound": {"signsgd_plus"},
    "signgd_bound": {"signgd"},
    "rate_bounds_v1": {"signsvrg_v1"},
    "rate_bounds_v2": {"signsvrg_v2"},
    "update_count_bound": _VR_ALGOS,
    "comm_bits_bound": _VR_ALGOS,
}


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field name."""

    def __init__(self, fld: str, msg: str):
        super().__init__(f"config error in {fld!r}: {msg}")
        self.field = fld


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    algo: str
    schedule: str
    q: float
    T: int
    seeds: tuple[int, ...]
    x1: Any  # "zeros" | {"gaussian": scale} | tuple of floats
    P: float | None = None
    alpha: float | None = None
    gamma: float | None = None
    D: float | None = None
    g_inf: float | None = None
    F: int = 32
    checks: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.algo not in ALGORITHMS:
            raise ConfigError("algo", f"unknown algorithm {self.algo!r}; known: {sorted(ALGORITHMS)}")
        if self.schedule not in SCHEDULES:
            raise ConfigError("schedule", f"unknown schedule {self.schedule!r}; known: {sorted(SCHEDULES)}")
        if self.algo not in _SCHEDULE_ALGOS[self.schedule]:
            raise ConfigError(
                "schedule",
                f"schedule {self.schedule!r} does not apply to algorithm {self.algo!r}",
            )
        try:
            ConjugatePair(self.q)
        except ValueError as exc:
            raise ConfigError("q", str(exc)) from None
        if self.T < 1:
            raise ConfigError("T", f"T must be >= 1, got {self.T}")
        if not self.seeds:
            raise ConfigError("seeds", "need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", "seeds must be distinct")
        if self.F < 1:
            raise ConfigError("F", f"F must be >= 1, got {self.F}")
        if self.P is not None and self.P < 1:
            raise ConfigError("P", f"P must be >= 1, got {self.P}")
        if self.schedule == "manual" and (self.gamma is None or self.gamma <= 0):
            raise ConfigError("gamma", "manual schedule requires a positive gamma")
        if self.schedule == "manual" and self.algo in _VR_ALGOS and (self.D is None or self.D <= 0):
            raise ConfigError("D", "manual schedule with a reference-point method requires D > 0")
        for name in self.checks:
            if name not in CHECKS:
                raise ConfigError("checks", f"unknown check {name!r}; known: {sorted(CHECKS)}")
            allowed = CHECKS[name]
            if allowed is not None and self.algo not in allowed:
                raise ConfigError(
                    "checks", f"check {name!r} does not apply to algorithm {self.algo!r}"
                )


def _parse_q(raw: Any) -> float:
    if raw in (1, 2):
        return float(raw)
    if raw in ("inf", "Inf", "INF") or raw == math.inf:
        return math.inf
    raise ConfigError("q", f"q must be 1, 2, or \"inf\", got {raw!r}")


def config_from_dict(doc: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a single JSON object")
    known = {
        "problem", "algo", "schedule", "q", "T", "seeds", "x1", "P",
        "alpha", "gamma", "D", "g_inf", "F", "checks",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(key, "unknown config field")
    missing = [k for k in ("problem", "algo", "schedule", "q", "T", "seeds", "x1") if k not in doc]
    if missing:
        raise ConfigError(missing[0], "required field missing")
    pdoc = doc["problem"]
    if not isinstance(pdoc, dict):
        raise ConfigError("problem", "must be an object")
    try:
        pspec = ProblemSpec(
            kind=pdoc.get("kind", ""),
            d=int(pdoc.get("d", 0)),
            n=int(pdoc.get("n", 0)),
            seed=int(pdoc.get("seed", 0)),
            lam=float(pdoc.get("lam", 0.0)),
            label_noise=float(pdoc.get("label_noise", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError("problem", str(exc)) from None
    x1 = doc["x1"]
    if isinstance(x1, list):
        x1 = tuple(float(v) for v in x1)
    elif isinstance(x1, dict):
        if set(x1) != {"gaussian"} or float(x1["gaussian"]) <= 0:
            raise ConfigError("x1", 'object form must be {"gaussian": positive_scale}')
        x1 = {"gaussian": float(x1["gaussian"])}
    elif x1 != "zeros":
        raise ConfigError("x1", f'must be "zeros", {{"gaussian": scale}}, or a list, got {x1!r}')
    return ExperimentConfig(
        problem=pspec,
        algo=str(doc["algo"]),
        schedule=str(doc["schedule"]),
        q=_parse_q(doc["q"]),
        T=int(doc["T"]),
        seeds=tuple(int(s) for s in doc["seeds"]),
        x1=x1,
        P=None if doc.get("P") is None else float(doc["P"]),
        alpha=None if doc.get("alpha") is None else float(doc["alpha"]),
        gamma=None if doc.get("gamma") is None else float(doc["gamma"]),
        D=None if doc.get("D") is None else float(doc["D"]),
        g_inf=None if doc.get("g_inf") is None else float(doc["g_inf"]),
        F=int(doc.get("F", 32)),
        checks=tuple(str(c) for c in doc.get("checks", ())),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return config_from_dict(doc)


@dataclass
class _Derived:
    """Quantities resolved from (config, problem) before running."""

    x1: np.ndarray
    gamma: float
    D: float | None
    L: float | None
    P: float
    g_inf: float | None
    pair: ConjugatePair
    f_star: float | None = None
    f_star_source: str | None = None
    x_star: np.ndarray | None = None

    def as_dict(self) -> dict:
        return {
            "x1": [float(v) for v in self.x1],
            "gamma": self.gamma,
            "D": self.D,
            "L": self.L,
            "P": self.P,
            "g_inf": self.g_inf,
            "q": "inf" if self.pair.q == math.inf else int(self.pair.q),
            "f_star": self.f_star,
            "f_star_source": self.f_star_source,
            "x_star": None if self.x_star is None else [float(v) for v in self.x_star],
        }


def _resolve_x1(cfg: ExperimentConfig, prob: FiniteSumProblem) -> np.ndarray:
    if cfg.x1 == "zeros":
        return np.zeros(prob.d)
    if isinstance(cfg.x1, dict):
        scale = cfg.x1["gaussian"]
        gen = RngStream(cfg.problem.seed).child("x1").generator
        return scale * gen.standard_normal(prob.d)
    x1 = np.asarray(cfg.x1, dtype=np.float64)
    if x1.shape != (prob.d,):
        raise ConfigError("x1", f"explicit x1 must have length d={prob.d}, got {x1.shape}")
    if not np.all(np.isfinite(x1)):
        raise ConfigError("x1", "explicit x1 must be finite")
    return x1


def _resolve_alpha(cfg: ExperimentConfig, prob: FiniteSumProblem, x1: np.ndarray) -> float:
    if cfg.alpha is not None:
        if cfg.alpha <= 0:
            raise ConfigError("alpha", f"alpha must be positive, got {cfg.alpha}")
        return cfg.alpha
    opt = prob.optimum()
    if opt is None:
        raise ConfigError(
            "alpha",
            f"schedule {cfg.schedule!r} needs a distance to the optimum; problem "
            f"{cfg.problem.kind!r} has no closed-form optimum, supply alpha explicitly",
        )
    dist = float(norm(x1 - opt[0], 2))
    if dist <= 0:
        raise ConfigError("alpha", "x1 coincides with the optimum; supply alpha explicitly")
    return dist


def _resolve(cfg: ExperimentConfig, prob: FiniteSumProblem) -> _Derived:
    x1 = _resolve_x1(cfg, prob)
    pair = ConjugatePair(cfg.q)
    P = float(cfg.P) if cfg.P is not None else float(cfg.F * prob.n)

    needs_l = cfg.algo in _VR_ALGOS or cfg.algo == "signgd"
    L = prob.lipschitz_constant(cfg.q) if needs_l else None
    if needs_l and L is None:
        raise ConfigError(
            "algo",
            f"algorithm {cfg.algo!r} needs an analytic smoothness constant, but problem "
            f"{cfg.problem.kind!r} provides none",
        )

    if cfg.schedule == "cor1":
        gamma, d_factory = schedule_cor1(prob.d, cfg.q, L, cfg.T)
        D = d_factory(P) if cfg.algo in _VR_ALGOS else None
    elif cfg.schedule == "cor2":
        alpha = _resolve_alpha(cfg, prob, x1)
        gamma, d_factory = schedule_cor2(alpha, prob.d, cfg.T)
        D = d_factory(P)
    elif cfg.schedule == "sec2":
        gamma = schedule_sec2(_resolve_alpha(cfg, prob, x1), prob.d, cfg.T)
        D = None
    else:  # manual
        gamma = float(cfg.gamma)
        D = cfg.D if cfg.algo in _VR_ALGOS else None

    g_inf = cfg.g_inf
    if cfg.algo == "signsgd_plus" and g_inf is None:
        g_inf = prob.grad_bound_inf()
        if g_inf is None:
            raise ConfigError(
                "g_inf",
                f"signsgd_plus needs a gradient bound; problem {cfg.problem.kind!r} "
                "provides none, supply g_inf explicitly",
            )
    return _Derived(x1=x1, gamma=gamma, D=D, L=L, P=P, g_inf=g_inf, pair=pair)


def _resolve_f_star(derived: _Derived, prob: FiniteSumProblem) -> float:
    if derived.f_star is not None:
        return derived.f_star
    opt = prob.optimum()
    if opt is not None:
        derived.x_star = opt[0]
        derived.f_star = float(opt[1])
        derived.f_star_source = "optimum"
    else:
        low = prob.f_lower_bound()
        if low is not None:
            derived.f_star = float(low)
            derived.f_star_source = "lower_bound"
        else:
            derived.f_star = float(numeric_f_star(prob))
            derived.f_star_source = "numeric"
    return derived.f_star


def _require_x_star(derived: _Derived, prob: FiniteSumProblem, check: str) -> np.ndarray:
    opt = prob.optimum()
    if opt is None:
        raise ConfigError(
            "checks", f"check {check!r} needs a closed-form optimum; problem provides none"
        )
    derived.x_star = opt[0]
    derived.f_star = float(opt[1])
    derived.f_star_source = "optimum"
    return opt[0]


def _evaluate_check(
    name: str,
    cfg: ExperimentConfig,
    prob: FiniteSumProblem,
    derived: _Derived,
    traces: list[Trace],
) -> list[BoundReport]:
    pair = derived.pair
    if name == "svrg_grad_bound_v1":
        return [svrg_grad_bound_v1(traces, derived.L, derived.D, pair, derived.gamma)]
    if name == "svrg_grad_bound_v2":
        return [svrg_grad_bound_v2(traces, derived.L, derived.D, pair, derived.gamma, prob.d)]
    if name == "svrg_gap_bound":
        x_star = _require_x_star(derived, prob, name)
        return [
            svrg_gap_bound(
                traces, derived.L, derived.D, pair, derived.gamma, prob.d,
                derived.f_star, x_star,
            )
        ]
    if name == "regret_bound":
        x_star = _require_x_star(derived, prob, name)
        return [
            regret_bound(traces, derived.g_inf, derived.gamma, prob.d, derived.f_star, x_star)
        ]
    if name == "final_gap_bound":
        x_star = _require_x_star(derived, prob, name)
        return [final_gap_bound(traces, prob, derived.g_inf, x_star, derived.f_star)]
    if name == "signgd_bound":
        f_star = _resolve_f_star(derived, prob)
        return [signgd_bound(traces[0], derived.L, pair, derived.gamma, prob.d, f_star)]
    if name in ("rate_bounds_v1", "rate_bounds_v2"):
        f_star = _resolve_f_star(derived, prob)
        rm = rate_metrics(traces, pair, derived.D, derived.L, prob.d, cfg.T, f_star)
        if name == "rate_bounds_v1":
            # either branch suffices; report the one that holds (radius if both/neither)
            branch = rm.ratio_bound if (rm.ratio_bound.holds and not rm.radius_bound.holds) else rm.radius_bound
            return [
                BoundReport(
                    name="rate_v1_either_bound",
                    lhs=branch.lhs,
                    rhs=branch.rhs,
                    tol=branch.tol,
                    holds=rm.v1_holds,
                    n_seeds=len(traces),
                )
            ]
        return [rm.max_bound]
    if name == "update_count_bound":
        reports = [update_count_bound(tr, derived.P) for tr in traces]
        worst = max(reports, key=lambda r: r.lhs)
        return [
            BoundReport(
                "update_count_bound", worst.lhs, worst.rhs, 0.0,
                all(r.holds for r in reports), len(traces),
            )
        ]
    if name == "comm_bits_bound":
        reports = [comm_bits_bound(tr, cfg.F, prob.n, prob.d, derived.P) for tr in traces]
        worst = max(reports, key=lambda r: r.lhs)
        return [
            BoundReport(
                "comm_bits_bound", worst.lhs, worst.rhs, 0.0,
                all(r.holds for r in reports), len(traces),
            )
        ]
    raise ConfigError("checks", f"unknown check {name!r}")


@dataclass
class ExperimentResult:
    config_echo: dict
    derived: _Derived
    traces: list[Trace]
    trace_paths: list[str]
    reports: list[BoundReport]
    all_hold: bool
    wall_time_s: float

    def summary_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "derived": self.derived.as_dict(),
            "traces": self.trace_paths,
            "reports": [r.as_dict() for r in self.reports],
            "all_hold": self.all_hold,
            "meta": {"package_version": __version__},
        }


def _config_echo(cfg: ExperimentConfig) -> dict:
    return {
        "problem": {
            "kind": cfg.problem.kind,
            "d": cfg.problem.d,
            "n": cfg.problem.n,
            "seed": cfg.problem.seed,
            "lam": cfg.problem.lam,
            "label_noise": cfg.problem.label_noise,
        },
        "algo": cfg.algo,
        "schedule": cfg.schedule,
        "q": "inf" if cfg.q == math.inf else int(cfg.q),
        "T": cfg.T,
        "seeds": list(cfg.seeds),
        "x1": cfg.x1 if not isinstance(cfg.x1, tuple) else list(cfg.x1),
        "P": cfg.P,
        "alpha": cfg.alpha,
        "gamma": cfg.gamma,
        "D": cfg.D,
        "g_inf": cfg.g_inf,
        "F": cfg.F,
        "checks": list(cfg.checks),
    }


def execute_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    """Run all seeds, evaluate all requested checks, optionally write
    trace CSVs, summary.json, and timing.json under out_dir."""
    t_start = time.perf_counter()
    prob = make_problem(cfg.problem)
    derived = _resolve(cfg, prob)
    spec = RunSpec(
        algo=cfg.algo,
        gamma=derived.gamma,
        x1=derived.x1,
        q=cfg.q,
        D=derived.D,
        L=derived.L,
        g_inf=derived.g_inf,
        float_bits=cfg.F,
    )
    traces = [run(spec, prob, cfg.T, seed) for seed in cfg.seeds]

    reports: list[BoundReport] = []
    for name in cfg.checks:
        reports.extend(_evaluate_check(name, cfg, prob, derived, traces))
    all_hold = all(r.holds for r in reports)

    trace_paths: list[str] = []
    result = ExperimentResult(
        config_echo=_config_echo(cfg),
        derived=derived,
        traces=traces,
        trace_paths=trace_paths,
        reports=reports,
        all_hold=all_hold,
        wall_time_s=time.perf_counter() - t_start,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for seed, tr in zip(cfg.seeds, traces):
            fname = f"trace_seed{seed}.csv"
            tr.to_csv(str(out / fname))
            trace_paths.append(fname)
        with open(out / "summary.json", "w") as fh:
            json.dump(result.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out / "timing.json", "w") as fh:
            json.dump({"wall_time_s": result.wall_time_s}, fh)
            fh.write("\n")
    return result
