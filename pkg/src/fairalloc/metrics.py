"""Utilization, service profiles, Price of Fairness and its known bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Optional, Sequence

from . import distributions as dist
from .instance import Allocation, Instance, Mode, as_amounts

BOUND_SLACK = 1e-6


@dataclass(frozen=True)
class ServiceProfile:
    q_values: tuple[float, ...]
    gap: float

    @classmethod
    def from_q(cls, q_values: Sequence[float]) -> "ServiceProfile":
        q = tuple(float(x) for x in q_values)
        return cls(q, max(q) - min(q))


def utilization(inst: Instance, alloc) -> float:
    """Expected number of candidates served, summed over groups."""
    amounts = as_amounts(inst, alloc)
    return math.fsum(dist.expected_min(d, r) for d, r in zip(inst.demands, amounts))


def service_profile(inst: Instance, alloc) -> ServiceProfile:
    amounts = as_amounts(inst, alloc)
    return ServiceProfile.from_q([dist.service_prob(d, r) for d, r in zip(inst.demands, amounts)])


def bound_inverse_epsilon(epsilon: float) -> float:
    """Worst-case PoF for fractional allocation at fairness level ``epsilon > 0``."""
    epsilon = float(epsilon)
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1]; no bound exists at 0 (got {epsilon!r})")
    return 1.0 / epsilon


def bound_powerlaw(n_groups: int) -> float:
    """``n * H_n``: PoF ceiling for ``n`` Lomax groups, independent of parameters."""
    if int(n_groups) != n_groups or n_groups < 1:
        raise ValueError(f"n_groups must be a positive integer, got {n_groups!r}")
    n = int(n_groups)
    return n * math.fsum(1.0 / k for k in range(1, n + 1))


def scaled_family_check(inst: Instance, grid_points: int = 64, tol: float = 1e-9) -> bool:
    """True when every pair of CDFs is the same curve rescaled by the mean ratio.

    Checks ``|F_i(r) - F_j(r * mean_j / mean_i)| <= tol`` at ``grid_points``
    quantile-spaced points of each ``F_i``.  When this holds the max-utilization
    allocation already equalizes service probabilities.
    """
    if not inst.all_continuous:
        raise ValueError("scaled-family check applies to continuous demand only")
    if grid_points < 1:
        raise ValueError("grid_points must be >= 1")
    demands = inst.demands
    taus = [(k + 1) / (grid_points + 1) for k in range(grid_points)]
    for i, j in combinations(range(len(demands)), 2):
        for a, b in ((i, j), (j, i)):
            da, db = demands[a], demands[b]
            ratio = dist.mean(db) / dist.mean(da)
            for tau in taus:
                r = dist.quantile(da, tau)
                if abs(dist.cdf(da, r) - dist.cdf(db, r * ratio)) > tol:
                    return False
    return True


@dataclass(frozen=True)
class PofReport:
    u_max: float
    u_fair: float
    pof: float
    epsilon: float
    bound_inverse_eps: Optional[float]
    bound_powerlaw: Optional[float]
    bound_satisfied: bool
    max_allocation: tuple[float, ...] = field(default=(), compare=False)
    fair_allocation: tuple[float, ...] = field(default=(), compare=False)

    @property
    def pof_infinite(self) -> bool:
        return math.isinf(self.pof)

    FIELDS = ("u_max", "u_fair", "pof", "pof_infinite", "epsilon",
              "bound_inverse_eps", "bound_powerlaw", "bound_satisfied")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pof_infinite"] = self.pof_infinite
        if self.pof_infinite:
            out["pof"] = None
        out["max_allocation"] = list(self.max_allocation)
        out["fair_allocation"] = list(self.fair_allocation)
        return out

    def csv_row(self) -> str:
        d = self.to_dict()
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(
            ["" if d[k] is None else (f"{d[k]:.12g}" if isinstance(d[k], float) else d[k]) for k in self.FIELDS])
        return buf.getvalue()


def price_of_fairness(inst: Instance, epsilon: float) -> PofReport:
    """Ratio of unconstrained to ``epsilon``-fair maximum utilization.

    Integer instances use the greedy optimum and the exhaustive fair oracle,
    so they must be small enough to enumerate.  Fractional instances use the
    analytic solvers.  ``u_fair = 0 < u_max`` yields ``pof = inf``.
    """
    from . import oracles, solvers

    epsilon = float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon!r}")

    if inst.mode is Mode.INTEGER:
        best = solvers.greedy_discrete(inst)
        u_max, max_alloc = best.utilization, best.allocation.amounts
        if epsilon >= 1.0:
            u_fair, fair_alloc = u_max, max_alloc
        else:
            fair = oracles.exhaustive_discrete_fair(inst, epsilon, reduce_symmetry=True)
            u_fair, fair_alloc = fair.best_value, fair.best_allocation.amounts
    else:
        best = solvers.max_utilization(inst)
        fair = solvers.fair_band(inst, epsilon)
        u_max, max_alloc = best.utilization, best.allocation.amounts
        u_fair, fair_alloc = fair.utilization, fair.allocation.amounts

    if u_fair > 0.0:
        pof = u_max / u_fair
    else:
        pof = math.inf if u_max > 0.0 else 1.0

    fractional = inst.mode is Mode.FRACTIONAL
    b_eps = bound_inverse_epsilon(epsilon) if fractional and epsilon > 0.0 else None
    all_lomax = all(isinstance(d, dist.Lomax) for d in inst.demands)
    b_pow = bound_powerlaw(len(inst)) if fractional and all_lomax else None
    satisfied = all(pof <= b + BOUND_SLACK for b in (b_eps, b_pow) if b is not None)
    return PofReport(u_max, u_fair, pof, epsilon, b_eps, b_pow, satisfied,
                     tuple(max_alloc), tuple(fair_alloc))
