"""Columnar run traces and their CSV serialization.

A trace of a T-iteration run holds T+1 records: entries 1..T are
start-of-iteration snapshots of the iterate x_t (objective, gradient norms,
reference count k(t), distance to the reference point), and entry T+1 is the
terminal state after the last step. Accounting columns (bits_cum,
grad_evals_cum) count everything completed strictly before the snapshot, so
row 1 carries only setup costs (e.g. the initial full-gradient sync of the
variance-reduced methods) and row T+1 carries the full run. The flags column
is the exception: row t flags the step taken from x_t (bit 1 = degenerate,
all-zero noise amplitude on some coordinate).

CSV layout is fixed; floats are written with repr (shortest round-trip), so
identical runs produce byte-identical files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["CSV_HEADER", "FLAG_DEGENERATE", "TraceRow", "Trace", "read_trace_csv"]

CSV_HEADER = "t,f,gnorm1,gnorm2,gnormInf,k,dist_to_ref,bits_cum,grad_evals_cum,flags"

FLAG_DEGENERATE = 1


@dataclass(frozen=True)
class TraceRow:
    t: int
    f: float
    gnorm1: float
    gnorm2: float
    gnorm_inf: float
    k: int
    dist_to_ref: float
    bits_cum: int
    grad_evals_cum: int
    flags: int

    def gnorm(self, p: float) -> float:
        """Gradient norm by exponent p in {1, 2, inf}."""
        if p == 1:
            return self.gnorm1
        if p == 2:
            return self.gnorm2
        if p == float("inf"):
            return self.gnorm_inf
        raise ValueError(f"p must be one of {{1, 2, inf}}, got {p!r}")


@dataclass
class Trace:
    """Struct-of-arrays record of one run; all arrays have length T+1."""

    t: np.ndarray
    f: np.ndarray
    gnorm1: np.ndarray
    gnorm2: np.ndarray
    gnorm_inf: np.ndarray
    k: np.ndarray
    dist_to_ref: np.ndarray
    bits_cum: np.ndarray
    grad_evals_cum: np.ndarray
    flags: np.ndarray
    x1: np.ndarray
    x_mean: np.ndarray
    x_final: np.ndarray
    iterates: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def T(self) -> int:
        """Number of iterations (rows excluding the terminal snapshot)."""
        return len(self.t) - 1

    def __len__(self) -> int:
        return self.T

    def gnorm(self, p: float) -> np.ndarray:
        if p == 1:
            return self.gnorm1
        if p == 2:
            return self.gnorm2
        if p == float("inf"):
            return self.gnorm_inf
        raise ValueError(f"p must be one of {{1, 2, inf}}, got {p!r}")

    def row(self, t: int) -> TraceRow:
        """Row by iteration number t in 1..T+1."""
        if not 1 <= t <= self.T + 1:
            raise IndexError(f"t must be in 1..{self.T + 1}, got {t}")
        i = t - 1
        return TraceRow(
            t=int(self.t[i]),
            f=float(self.f[i]),
            gnorm1=float(self.gnorm1[i]),
            gnorm2=float(self.gnorm2[i]),
            gnorm_inf=float(self.gnorm_inf[i]),
            k=int(self.k[i]),
            dist_to_ref=float(self.dist_to_ref[i]),
            bits_cum=int(self.bits_cum[i]),
            grad_evals_cum=int(self.grad_evals_cum[i]),
            flags=int(self.flags[i]),
        )

    @property
    def final(self) -> TraceRow:
        return self.row(self.T + 1)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for i in range(len(self.t)):
                fh.write(
                    f"{int(self.t[i])},{float(self.f[i])!r},{float(self.gnorm1[i])!r},"
                    f"{float(self.gnorm2[i])!r},{float(self.gnorm_inf[i])!r},{int(self.k[i])},"
                    f"{float(self.dist_to_ref[i])!r},{int(self.bits_cum[i])},"
                    f"{int(self.grad_evals_cum[i])},{int(self.flags[i])}\n"
                )


def read_trace_csv(path: str) -> Trace:
    """Parse a trace CSV back into a (metrics-only) Trace.

    Iterate-dependent fields (x1, x_mean, x_final) are not stored in the CSV
    and come back as empty arrays; metric columns round-trip exactly.
    """
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header!r}")
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    if raw.shape[1] != 10:
        raise ValueError(f"expected 10 columns, got {raw.shape[1]}")
    empty = np.empty(0)
    return Trace(
        t=raw[:, 0].astype(np.int64),
        f=raw[:, 1],
        gnorm1=raw[:, 2],
        gnorm2=raw[:, 3],
        gnorm_inf=raw[:, 4],
        k=raw[:, 5].astype(np.int64),
        dist_to_ref=raw[:, 6],
        bits_cum=raw[:, 7].astype(np.int64),
        grad_evals_cum=raw[:, 8].astype(np.int64),
        flags=raw[:, 9].astype(np.int64),
        x1=empty,
        x_mean=empty,
        x_final=empty,
    )
