"""Analytic cost model for plain and successive-halving execution (ms)."""

from __future__ import annotations

import statistics
from dataclasses import dataclass

from shift.errors import InvalidField
from shift.optimizer.sh import pulls_per_round, round_sizes

PLAIN = "Plain"
SUCCESSIVE_HALVING = "SuccessiveHalving"


@dataclass
class CostModelParams:
    """Inputs of the cost model.

    Attributes:
        P: number of equal accelerator devices.
        L: per-model load time (ms).
        I: per-model, per-sample inference time (ms).
        N: train samples.  O: test samples.
        T_N: train-data load time (ms).  T_O: test-representation load time (ms).
        E_proxy: per-sample proxy time (ms).
    """

    P: int
    L: list
    I: list
    N: int
    O: int
    T_N: float
    T_O: float
    E_proxy: float

    def __post_init__(self):
        self.L = [float(x) for x in self.L]
        self.I = [float(x) for x in self.I]
        if self.P < 1:
            raise InvalidField("P must be >= 1")
        if len(self.L) != len(self.I):
            raise InvalidField("L and I need one entry per model")
        if min(self.I, default=1.0) <= 0 or min(self.L, default=0.0) < 0:
            raise InvalidField("inference costs must be > 0 and load costs >= 0")
        if self.N < 0 or self.O < 0 or self.T_N < 0 or self.T_O < 0 or self.E_proxy < 0:
            raise InvalidField("sizes and times must be non-negative")

    @property
    def M(self) -> int:
        return len(self.I)


def cost_without_sh(p: CostModelParams) -> float:
    total = 0.0
    for L_i, I_i in zip(p.L, p.I):
        total += p.T_N + p.T_O + 2 * L_i + I_i * p.O + I_i * p.N + p.E_proxy * p.N
    return total / p.P


def cost_with_sh(p: CostModelParams, C: int, B: int | None = None, q: int = 1) -> float:
    """SH cost with survivors assumed to be the slowest models."""
    if p.M < 2:
        return cost_without_sh(p)
    from shift.optimizer.sh import minimal_budget

    B = minimal_budget(p.M, q) if B is None else B
    sizes = round_sizes(p.M, q)
    r = pulls_per_round(p.M, B, q)
    by_cost = sorted(range(p.M), key=lambda i: (-p.I[i], i))
    total = sum(L_i + I_i * p.O for L_i, I_i in zip(p.L, p.I)) / p.P
    seen = 0
    for k, (size, r_k) in enumerate(zip(sizes, r)):
        seen += C * r_k
        S_k = by_cost[:size]
        train = sum(p.L[j] + p.T_N + p.I[j] * C * r_k for j in S_k)
        proxy = sum(p.T_O + p.E_proxy * seen for _ in S_k)
        total += (train + proxy) / min(p.P, len(S_k))
    return total


def choose_plan(p: CostModelParams, C: int, B: int | None = None, q: int = 1) -> str:
    """Cheaper of the two plans; equal costs pick the plain plan."""
    if p.M < 2 or p.M <= q:
        return PLAIN
    return SUCCESSIVE_HALVING if cost_with_sh(p, C, B, q) < cost_without_sh(p) else PLAIN


def calibrate_e_proxy(measurements) -> float:
    """Per-sample proxy cost from ``(n_samples, elapsed_ms)`` measurements.

    Uses the median of the per-model rates so one outlier model cannot skew
    the estimate.
    """
    rates = [ms / n for n, ms in measurements if n > 0]
    return statistics.median(rates) if rates else 0.0
