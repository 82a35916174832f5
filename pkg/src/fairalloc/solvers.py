"""Max-utilization and epsilon-fair allocation solvers.

Every fractional solver reduces to the same primitive: a vector-valued
allocation rule ``alloc_at(x)`` that is componentwise nondecreasing in a scalar
"depth" ``x >= 0``, searched by bisection until the allocation exhausts the
budget.  Depth is a log-level: ``x = -log(1 - tau)`` for a CDF level ``tau``
(water-filling) and ``x = -log(1 - m)`` for a common service level ``m``.
Working in depth keeps levels extremely close to 1 distinguishable.

When bisection brackets a discontinuity (discrete demand jumps a whole
segment at one level) the final allocation interpolates linearly between the
two bracketing allocations; every group that moves between them has the same
marginal value, so the interpolation is as good as any other split.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import distributions as dist
from .distributions import Demand, Discrete
from .instance import Allocation, Group, Instance, Mode, as_amounts
from .metrics import ServiceProfile, service_profile, utilization

__all__ = [
    "Allocation", "Group", "Instance", "Mode", "SolveReport",
    "greedy_discrete", "waterfill_continuous", "max_utilization",
    "fair_exact_zero", "fair_band", "clamp_to_fair", "top_up",
]

BUDGET_RTOL = 1e-9
MAX_BISECT = 200
BAND_GRID = 200
GOLDEN_ITERS = 60
FAIR_CHECK_TOL = 1e-9

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolveReport:
    allocation: Allocation
    utilization: float
    profile: ServiceProfile
    level: Optional[float]
    iterations: int
    residual: float
    converged: bool = True


def budget_tolerance(budget: float, rtol: float | None = None) -> float:
    return (BUDGET_RTOL if rtol is None else rtol) * max(1.0, budget)


def _report(inst: Instance, amounts: Sequence[float], level, iterations: int,
            rtol: float | None = None) -> SolveReport:
    alloc = Allocation(tuple(amounts))
    residual = abs(alloc.total - inst.budget)
    return SolveReport(alloc, utilization(inst, alloc), service_profile(inst, alloc), level,
                       iterations, residual, residual <= budget_tolerance(inst.budget, rtol))


# ---------------------------------------------------------------------------
# level search
# ---------------------------------------------------------------------------

AllocRule = Callable[[float], list]


@dataclass
class _Fill:
    amounts: list
    depth: float
    iterations: int
    short: bool = False  # budget could not be absorbed below the depth cap


def _fill(alloc_at: AllocRule, budget: float, lo: float = 0.0, cap: float = math.inf) -> _Fill:
    """Find the depth in ``[lo, cap]`` at which ``sum(alloc_at(depth)) == budget``.

    Assumes ``sum(alloc_at(lo)) <= budget``.  Returns ``short=True`` with
    ``alloc_at(cap)`` when even the cap cannot absorb the budget.
    """
    r_lo = alloc_at(lo)
    s_lo = math.fsum(r_lo)
    if s_lo >= budget:
        return _Fill(r_lo, lo, 0)
    iterations = 0
    r_cap = alloc_at(cap)
    s_cap = math.fsum(r_cap)
    if s_cap < budget:
        return _Fill(r_cap, cap, 0, short=True)
    if math.isfinite(cap):
        hi, r_hi, s_hi = cap, r_cap, s_cap
    else:
        step = 1.0
        while True:
            iterations += 1
            hi = lo + step
            r_hi = alloc_at(hi)
            s_hi = math.fsum(r_hi)
            if s_hi >= budget:
                break
            lo, r_lo, s_lo = hi, r_hi, s_hi
            step *= 2.0
    fine = 1e-13 * max(1.0, budget)
    while iterations < MAX_BISECT and s_hi - s_lo > fine:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        iterations += 1
        r_mid = alloc_at(mid)
        s_mid = math.fsum(r_mid)
        if s_mid < budget:
            lo, r_lo, s_lo = mid, r_mid, s_mid
        else:
            hi, r_hi, s_hi = mid, r_mid, s_mid
    if math.isinf(s_hi):
        return _Fill(r_lo, lo, iterations, short=True)
    theta = 0.0 if s_hi == s_lo else min(1.0, max(0.0, (budget - s_lo) / (s_hi - s_lo)))
    amounts = [a + theta * (b - a) for a, b in zip(r_lo, r_hi)]
    return _Fill(amounts, lo + theta * (hi - lo), iterations)


def _level(depth: float) -> float:
    """Depth back to a level in [0, 1]."""
    return -math.expm1(-depth)


def _depth(level: float) -> float:
    return math.inf if level >= 1.0 else -math.log1p(-level)


def _waterfill(demands: Sequence[Demand], budget: float, lo=None, hi=None) -> _Fill:
    """Maximize total expected service subject to a budget and per-group boxes.

    Each group is filled up to the point where its survival probability (the
    marginal utilization of one more unit) drops to a common level.
    """
    n = len(demands)
    lo = [0.0] * n if lo is None else list(lo)
    hi = [math.inf] * n if hi is None else list(hi)

    def alloc_at(x: float) -> list:
        out = []
        for d, a, b in zip(demands, lo, hi):
            r = dist.inverse_survival_log(d, -x)
            out.append(a if r < a else (b if r > b else r))
        return out

    return _fill(alloc_at, budget)


def _common_service(demands: Sequence[Demand], budget: float) -> _Fill:
    """Allocation giving every group the same service probability."""

    def alloc_at(x: float) -> list:
        return [dist.inverse_service_deficit_log(d, -x) for d in demands]

    return _fill(alloc_at, budget)


# ---------------------------------------------------------------------------
# max utilization
# ---------------------------------------------------------------------------

def _unit_gain(d: Demand, r: float) -> float:
    if isinstance(d, Discrete):
        return dist.survival(d, r)
    return dist.expected_min(d, r + 1.0) - dist.expected_min(d, r)


def _greedy_units(demands: Sequence[Demand], units: int) -> list[float]:
    amounts = [0.0] * len(demands)
    heap = [(-_unit_gain(d, 0.0), i) for i, d in enumerate(demands)]
    heapq.heapify(heap)
    for _ in range(units):
        _, i = heapq.heappop(heap)
        amounts[i] += 1.0
        heapq.heappush(heap, (-_unit_gain(demands[i], amounts[i]), i))
    return amounts


def greedy_discrete(inst: Instance) -> SolveReport:
    """Integer max-utilization: hand out units one by one to the largest marginal gain.

    For discrete demand the gain of the next unit at ``r`` is ``1 - F(r)``;
    ties go to the lowest group index.
    """
    if not float(inst.budget).is_integer():
        raise ValueError(f"greedy allocation needs an integer budget, got {inst.budget!r}")
    units = int(inst.budget)
    amounts = _greedy_units(inst.demands, units)
    return _report(inst, amounts, None, units)


def _greedy_fractional(inst: Instance) -> SolveReport:
    # utilization is piecewise linear with integer breakpoints, so the best
    # split of a fractional remainder is onto the best next unit
    units = int(math.floor(inst.budget))
    amounts = _greedy_units(inst.demands, units)
    rest = inst.budget - units
    if rest > 0.0:
        gains = [_unit_gain(d, r) for d, r in zip(inst.demands, amounts)]
        amounts[gains.index(max(gains))] += rest
    return _report(inst, amounts, None, units + (rest > 0.0))


def waterfill_continuous(inst: Instance, *, rtol: float | None = None) -> SolveReport:
    """Fractional max-utilization over continuous demand by equalizing CDF levels.

    ``level`` in the report is the common CDF value ``tau``.
    """
    if not inst.all_continuous:
        raise ValueError("water-filling needs continuous demand; use greedy_discrete for discrete demand")
    if inst.budget == 0.0:
        return _report(inst, [0.0] * len(inst), 0.0, 0, rtol)
    fill = _waterfill(inst.demands, inst.budget)
    return _report(inst, fill.amounts, _level(fill.depth), fill.iterations, rtol)


def max_utilization(inst: Instance, *, rtol: float | None = None) -> SolveReport:
    """Unconstrained optimum for either allocation mode and any demand mix."""
    if inst.mode is Mode.INTEGER:
        return greedy_discrete(inst)
    if inst.all_discrete:
        return _greedy_fractional(inst)
    if inst.all_continuous:
        return waterfill_continuous(inst, rtol=rtol)
    if inst.budget == 0.0:
        return _report(inst, [0.0] * len(inst), 0.0, 0, rtol)
    fill = _waterfill(inst.demands, inst.budget)
    return _report(inst, fill.amounts, _level(fill.depth), fill.iterations, rtol)


# ---------------------------------------------------------------------------
# fair allocations
# ---------------------------------------------------------------------------

def _require_fractional(inst: Instance) -> None:
    if inst.mode is not Mode.FRACTIONAL:
        raise ValueError("this solver works on fractional-allocation instances")


def _saturate(demands: Sequence[Demand], budget: float) -> list[float]:
    amounts = [dist.saturation(d) for d in demands]
    amounts[0] += budget - math.fsum(amounts)
    return amounts


def _exact_zero(inst: Instance) -> tuple[list, float, int]:
    """Equal-service allocation as (amounts, depth of the common level, iterations)."""
    demands = inst.demands
    if inst.budget == 0.0:
        return [0.0] * len(inst), 0.0, 0
    if inst.all_discrete and math.fsum(dist.saturation(d) for d in demands) <= inst.budget:
        return _saturate(demands, inst.budget), math.inf, 0
    fill = _common_service(demands, inst.budget)
    return fill.amounts, fill.depth, fill.iterations


def fair_exact_zero(inst: Instance, *, rtol: float | None = None) -> SolveReport:
    """Best allocation with identical service probability in every group.

    Utilization of such an allocation is ``m * sum(mean_i)`` for the common
    level ``m``, so the answer is the largest level the budget can buy.
    Discrete-only instances that can serve everyone put the surplus on the
    first group.
    """
    _require_fractional(inst)
    amounts, depth, iterations = _exact_zero(inst)
    return _report(inst, amounts, _level(depth), iterations, rtol)


def _band_solution(demands, budget: float, epsilon: float, v: float):
    """Best allocation whose service levels all lie in ``[1 - v, 1 - v + epsilon]``."""
    log_v = math.log(v) if v > 0.0 else -math.inf
    w = v - epsilon
    log_w = math.log(w) if w > 0.0 else -math.inf
    lo = [dist.inverse_service_deficit_log(d, log_v) for d in demands]
    hi = [max(a, dist.inverse_service_deficit_log(d, log_w)) for d, a in zip(demands, lo)]
    tol = budget_tolerance(budget)
    if math.fsum(lo) > budget + tol:
        return None
    fill = _waterfill(demands, budget, lo, hi)
    amounts = fill.amounts
    if fill.short:
        if w > 0.0:
            return None
        # everyone already fully served; surplus cannot change any q
        amounts = list(amounts)
        amounts[0] += budget - math.fsum(amounts)
    value = math.fsum(dist.expected_min(d, r) for d, r in zip(demands, amounts))
    return value, amounts, fill.iterations


def fair_band(inst: Instance, epsilon: float, *, rtol: float | None = None) -> SolveReport:
    """Maximum-utilization allocation whose fairness gap is at most ``epsilon``.

    An optimum keeps every service probability inside the band
    ``[m, m + epsilon]`` with ``m`` its smallest service level.  For a fixed
    band the problem is box-constrained water-filling; the band floor is then
    searched on a grid and refined by golden section around the best point.
    ``level`` reports the band floor ``m``.
    """
    _require_fractional(inst)
    epsilon = float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    if epsilon == 0.0:
        return fair_exact_zero(inst, rtol=rtol)
    if epsilon == 1.0:
        return max_utilization(inst, rtol=rtol)
    demands, budget = inst.demands, inst.budget
    if budget == 0.0:
        return _report(inst, [0.0] * len(inst), 0.0, 0, rtol)

    zero_amounts, zero_depth, _ = _exact_zero(inst)
    v0 = math.exp(-zero_depth)
    # band floor deficit range that admits a full-budget allocation
    v_lo, v_hi = max(v0, epsilon), min(1.0, v0 + epsilon)

    evaluations = 0
    best = (utilization(inst, zero_amounts), zero_amounts, _level(zero_depth))

    def value(v: float) -> float:
        nonlocal evaluations, best
        evaluations += 1
        sol = _band_solution(demands, budget, epsilon, v)
        if sol is None:
            return -math.inf
        val, amounts, _ = sol
        if val > best[0]:
            best = (val, amounts, 1.0 - v)
        return val

    if v_hi <= v_lo:
        value(v_lo)
    else:
        grid = [v_lo + (v_hi - v_lo) * k / (BAND_GRID - 1) for k in range(BAND_GRID)]
        vals = [value(v) for v in grid]
        j = max(range(BAND_GRID), key=vals.__getitem__)
        a, b = grid[max(j - 1, 0)], grid[min(j + 1, BAND_GRID - 1)]
        c, d = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
        fc, fd = value(c), value(d)
        for _ in range(GOLDEN_ITERS):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - _INV_PHI * (b - a)
                fc = value(c)
            else:
                a, c, fc = c, d, fd
                d = a + _INV_PHI * (b - a)
                fd = value(d)
    _, amounts, level = best
    return _report(inst, amounts, level, evaluations, rtol)


def clamp_to_fair(inst: Instance, epsilon: float, *, rtol: float | None = None) -> SolveReport:
    """An ``epsilon``-fair allocation with utilization at least ``epsilon * U_max``.

    Starts from the max-utilization allocation, cuts every group served above
    ``epsilon`` back to exactly ``epsilon``, then spends the freed budget with
    :func:`top_up`.  ``level`` reports ``epsilon``.
    """
    _require_fractional(inst)
    epsilon = float(epsilon)
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1]; the guarantee does not exist at 0 (got {epsilon!r})")
    best = max_utilization(inst, rtol=rtol)
    amounts = list(best.allocation.amounts)
    for i, (d, q) in enumerate(zip(inst.demands, best.profile.q_values)):
        if q > epsilon:
            amounts[i] = min(amounts[i], dist.inverse_service_prob(d, epsilon))
    topped = top_up(inst, amounts, epsilon)
    return _report(inst, topped.amounts, epsilon, best.iterations, rtol)


def top_up(inst: Instance, alloc, epsilon: float) -> Allocation:
    """Spend unused budget without breaking ``epsilon``-fairness or losing utilization.

    1. raise every group to the current highest service level;
    2. raise the common level until the budget runs out or everyone is
       fully served;
    3. any budget left after that goes to the first group.

    A step that the remaining budget cannot complete is carried out partially
    (lagging groups rise together) and ends the procedure.
    """
    demands = inst.demands
    amounts = list(as_amounts(inst, alloc))
    epsilon = float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    budget = inst.budget
    tol = budget_tolerance(budget)
    total = math.fsum(amounts)
    if total > budget + tol:
        raise ValueError(f"allocation uses {total!r}, more than the budget {budget!r}")
    q = [dist.service_prob(d, r) for d, r in zip(demands, amounts)]
    if max(q) - min(q) > epsilon + FAIR_CHECK_TOL:
        raise ValueError(f"allocation has fairness gap {max(q) - min(q)!r} > epsilon {epsilon!r}")
    if budget - total <= 1e-15 * max(1.0, budget):
        return Allocation(tuple(amounts))

    def raised(base):
        return lambda x: [max(r, dist.inverse_service_deficit_log(d, -x)) for d, r in zip(demands, base)]

    # service levels as depths -log(1 - q), which stay distinct near q = 1
    depths = [-dist.service_deficit_log(d, r) for d, r in zip(demands, amounts)]

    # step 1: lift laggards to the highest level
    depth = max(depths)
    fill = _fill(raised(amounts), budget, min(depths), depth)
    amounts = fill.amounts
    if not fill.short:
        return Allocation(tuple(amounts))

    # step 2: raise the common level.  Raising in increments of epsilon only
    # visits common-level allocations, so one search up to full service
    # reaches the same point as the stepwise procedure.
    fill = _fill(raised(amounts), budget, depth, math.inf)
    amounts = fill.amounts
    if not fill.short:
        return Allocation(tuple(amounts))

    # step 3: everyone fully served
    amounts[0] += budget - math.fsum(amounts)
    return Allocation(tuple(amounts))
