"""Brute-force ground truth: integer enumeration, simplex grid search, Monte Carlo.

These deliberately avoid the structure the solvers exploit.  They are slow and
guarded against accidental blow-up; use them on small instances only.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import distributions as dist
from .distributions import Discrete
from .instance import Allocation, Instance, Mode, as_amounts
from .metrics import utilization

MAX_CANDIDATES = 10**7
FAIR_FILTER_TOL_INTEGER = 1e-12
FAIR_FILTER_TOL_GRID = 1e-9
MC_CHUNK = 1 << 16  # multiple of 4: Philox emits four words per counter step

_PURPOSE_DEMAND = 0
_PURPOSE_ROUNDING = 1


class OracleMode(str, enum.Enum):
    EXHAUSTIVE_INTEGER = "ExhaustiveInteger"
    GRID_FRACTIONAL = "GridFractional"
    MONTE_CARLO = "MonteCarlo"


class EnumerationTooLarge(ValueError):
    """Raised instead of starting an enumeration above the candidate guard."""


@dataclass(frozen=True)
class OracleResult:
    best_allocation: Allocation
    best_value: float
    evaluated: int
    mode: OracleMode
    feasible: bool = True


# ---------------------------------------------------------------------------
# integer enumeration
# ---------------------------------------------------------------------------

def _require_integer(inst: Instance) -> int:
    if inst.mode is not Mode.INTEGER:
        raise ValueError("exhaustive enumeration needs an integer-allocation instance")
    return int(inst.budget)


def _classes(inst: Instance, reduce_symmetry: bool) -> list[list[int]]:
    """Group indices into classes of identical demand (singletons if not reducing)."""
    if not reduce_symmetry:
        return [[i] for i in range(len(inst))]
    classes: dict = {}
    for i, d in enumerate(inst.demands):
        classes.setdefault(d, []).append(i)
    return list(classes.values())


def _partitions_at_most(budget: int, parts: int) -> list[int]:
    """p[t] = number of nonincreasing ``parts``-tuples of nonnegative ints summing to t."""
    p = [1] + [0] * budget
    for k in range(1, parts + 1):
        # partitions into parts of size <= k, conjugate to at most k parts
        for t in range(k, budget + 1):
            p[t] += p[t - k]
    return p


def candidate_count(inst: Instance, *, reduce_symmetry: bool = False, up_to_budget: bool = False) -> int:
    """Number of integer allocations enumerated (sum == B, or sum <= B)."""
    budget = _require_integer(inst)
    ways = [1] + [0] * budget
    for cls in _classes(inst, reduce_symmetry):
        p = _partitions_at_most(budget, len(cls))
        ways = [sum(ways[s] * p[t - s] for s in range(t + 1)) for t in range(budget + 1)]
    return sum(ways) if up_to_budget else ways[budget]


def _guard(count: int) -> None:
    if count > MAX_CANDIDATES:
        raise EnumerationTooLarge(
            f"{count} candidate allocations exceed the enumeration guard of {MAX_CANDIDATES}")


def _enumerate(inst: Instance, *, reduce_symmetry: bool, up_to_budget: bool, epsilon: Optional[float]):
    """Depth-first search over integer allocations.

    Returns (best amounts, evaluated, feasible).  Ties keep the larger total,
    then the lexicographically first allocation in enumeration order.
    """
    budget = _require_integer(inst)
    _guard(candidate_count(inst, reduce_symmetry=reduce_symmetry, up_to_budget=up_to_budget))
    demands = inst.demands
    order = [i for cls in _classes(inst, reduce_symmetry) for i in cls]
    # slot k may not exceed slot k-1 when both belong to the same class
    same_as_prev = [False] * len(order)
    if reduce_symmetry:
        pos = 0
        for cls in _classes(inst, True):
            for j in range(1, len(cls)):
                same_as_prev[pos + j] = True
            pos += len(cls)
    values = [[dist.expected_min(demands[i], r) for r in range(budget + 1)] for i in order]
    qs = [[dist.service_prob(demands[i], r) for r in range(budget + 1)] for i in order]
    limit = math.inf if epsilon is None else epsilon + FAIR_FILTER_TOL_INTEGER
    n = len(order)
    current = [0] * n
    best = {"value": -math.inf, "total": -1, "amounts": None}
    evaluated = 0

    def visit(k: int, remaining: int, acc: float, qmin: float, qmax: float) -> None:
        nonlocal evaluated
        if k == n - 1:
            choices = range(remaining + 1) if up_to_budget else (remaining,)
            cap = current[k - 1] if k and same_as_prev[k] else budget
            for r in choices:
                if r > cap:
                    break
                evaluated += 1
                q = qs[k][r]
                if max(qmax, q) - min(qmin, q) > limit:
                    continue
                value = acc + values[k][r]
                total = budget - remaining + r
                if value > best["value"] or (value == best["value"] and total > best["total"]):
                    current[k] = r
                    best.update(value=value, total=total, amounts=list(current))
            return
        cap = min(remaining, current[k - 1]) if k and same_as_prev[k] else remaining
        for r in range(cap + 1):
            q = qs[k][r]
            lo, hi = min(qmin, q), max(qmax, q)
            if hi - lo > limit:
                continue
            current[k] = r
            visit(k + 1, remaining - r, acc + values[k][r], lo, hi)
        current[k] = 0

    visit(0, budget, 0.0, math.inf, -math.inf)
    if best["amounts"] is None:
        return [0.0] * n, evaluated, False
    amounts = [0.0] * n
    for slot, i in enumerate(order):
        amounts[i] = float(best["amounts"][slot])
    return amounts, evaluated, True


def _result(inst: Instance, amounts, evaluated: int, feasible: bool, mode: OracleMode) -> OracleResult:
    alloc = Allocation(tuple(amounts))
    value = utilization(inst, alloc) if feasible else 0.0
    return OracleResult(alloc, value, max(evaluated, 1), mode, feasible)


def exhaustive_discrete_max(inst: Instance, *, reduce_symmetry: bool = False) -> OracleResult:
    """Best integer allocation using exactly the whole budget, by enumeration.

    ``reduce_symmetry`` enumerates only one ordering within each set of groups
    with identical demand, which shrinks instances with many copies.
    """
    amounts, evaluated, feasible = _enumerate(inst, reduce_symmetry=reduce_symmetry,
                                              up_to_budget=False, epsilon=None)
    return _result(inst, amounts, evaluated, feasible, OracleMode.EXHAUSTIVE_INTEGER)


def exhaustive_discrete_fair(inst: Instance, epsilon: float, *, reduce_symmetry: bool = False,
                             full_budget: bool = False) -> OracleResult:
    """Best integer allocation with fairness gap at most ``epsilon``, by enumeration.

    By default allocations may leave units unused (``sum <= B``): an integer
    instance need not admit any epsilon-fair allocation of the whole budget.
    Pass ``full_budget=True`` to require ``sum == B``; if nothing qualifies
    the result has ``feasible=False`` and value 0.
    """
    epsilon = float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    amounts, evaluated, feasible = _enumerate(inst, reduce_symmetry=reduce_symmetry,
                                              up_to_budget=not full_budget, epsilon=epsilon)
    return _result(inst, amounts, evaluated, feasible, OracleMode.EXHAUSTIVE_INTEGER)


# ---------------------------------------------------------------------------
# fractional grid
# ---------------------------------------------------------------------------

def grid_slack(inst: Instance, step: float) -> float:
    """Lipschitz slack ``step * sum_i P(X_i > 0)`` between grid and true optima."""
    return step * math.fsum(dist.survival(d, 0.0) for d in inst.demands)


def grid_fractional(inst: Instance, epsilon: Optional[float] = None, step: float = 1e-3) -> OracleResult:
    """Best allocation on the simplex grid of spacing ``step``.

    The first ``n - 1`` groups take multiples of ``step``; the last takes what
    is left.  With ``epsilon`` given, candidates with gap above
    ``epsilon + 1e-9`` are discarded.
    """
    if inst.mode is not Mode.FRACTIONAL:
        raise ValueError("grid search needs a fractional-allocation instance")
    if not step > 0.0:
        raise ValueError(f"step must be > 0, got {step!r}")
    if epsilon is not None and not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    demands, budget, n = inst.demands, inst.budget, len(inst)
    k_max = int(math.floor(budget / step + 1e-9))
    count = (k_max + 1) ** (n - 1)
    _guard(count)
    if n == 1:
        return _result(inst, [budget], 1, True, OracleMode.GRID_FRACTIONAL)

    limit = math.inf if epsilon is None else epsilon + FAIR_FILTER_TOL_GRID
    ks = np.arange(k_max + 1)
    points = ks * step
    em = [dist.expected_min_array(d, points) for d in demands[:-1]]
    q = [dist.service_prob_array(d, points) for d in demands[:-1]]
    rest = np.maximum(budget - points, 0.0)  # last group's share after t grid steps elsewhere
    em_last = dist.expected_min_array(demands[-1], rest)
    q_last = dist.service_prob_array(demands[-1], rest)

    best_value, best_amounts, evaluated = -math.inf, None, 0
    free = n - 2  # groups iterated in Python; the one before last is vectorized
    for prefix in itertools.product(range(k_max + 1), repeat=free):
        used = sum(prefix)
        if used > k_max:
            continue
        acc = math.fsum(em[i][k] for i, k in enumerate(prefix))
        qs = [q[i][k] for i, k in enumerate(prefix)]
        qmin = min(qs, default=math.inf)
        qmax = max(qs, default=-math.inf)
        j = ks[: k_max - used + 1]
        totals = used + j
        vals = acc + em[free][j] + em_last[totals]
        lo = np.minimum(np.minimum(q[free][j], q_last[totals]), qmin)
        hi = np.maximum(np.maximum(q[free][j], q_last[totals]), qmax)
        evaluated += len(j)
        ok = (hi - lo) <= limit
        if not ok.any():
            continue
        vals = np.where(ok, vals, -np.inf)
        idx = int(np.argmax(vals))
        if vals[idx] > best_value:
            best_value = float(vals[idx])
            best_amounts = [k * step for k in prefix] + [j[idx] * step, float(rest[totals[idx]])]
    if best_amounts is None:
        return _result(inst, [0.0] * n, evaluated, False, OracleMode.GRID_FRACTIONAL)
    return _result(inst, best_amounts, evaluated, True, OracleMode.GRID_FRACTIONAL)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

class MonteCarloEstimate(NamedTuple):
    util_estimate: float
    util_stderr: float
    q_estimates: tuple[float, ...]


def _philox(seed: int, group: int, purpose: int, start: int) -> np.random.Generator:
    """Stream for (seed, group, purpose), positioned at replicate ``start``.

    Replicate ``t`` always reads the ``t``-th double of its stream, so any
    chunking of the replicate range sees the same numbers.
    """
    key = np.random.SeedSequence(seed, spawn_key=(group, purpose)).generate_state(2, np.uint64)
    bitgen = np.random.Philox(key=key)
    bitgen.advance(start // 4)
    return np.random.Generator(bitgen)


def _chunk(demands, amounts, seed: int, start: int, stop: int):
    size = stop - start
    total = np.zeros(size)
    served_sums = []
    for i, (d, r) in enumerate(zip(demands, amounts)):
        x = dist.quantile_array(d, _philox(seed, i, _PURPOSE_DEMAND, start).random(size))
        if isinstance(d, Discrete) and not float(r).is_integer():
            # fractional resources over integer demand: a random adjacent integer
            floor = math.floor(r)
            u = _philox(seed, i, _PURPOSE_ROUNDING, start).random(size)
            r = floor + (u < r - floor)
        served = np.minimum(x, r)
        total += served
        served_sums.append(math.fsum(served))
    mean = float(total.mean())
    m2 = float(((total - mean) ** 2).sum())
    return size, mean, m2, served_sums


def monte_carlo(inst: Instance, alloc, reps: int, seed: int, *, workers: int = 1,
                chunk: int = MC_CHUNK) -> MonteCarloEstimate:
    """Simulate demand and return the utilization estimate, its stderr and per-group q.

    Results depend only on ``seed`` and ``reps``: replicates are processed in
    fixed-size chunks and combined in chunk order whatever ``workers`` is.
    """
    if int(reps) != reps or reps <= 0:
        raise ValueError(f"reps must be a positive integer, got {reps!r}")
    if chunk <= 0 or chunk % 4:
        raise ValueError("chunk must be a positive multiple of 4")
    reps = int(reps)
    amounts = as_amounts(inst, alloc)
    demands = inst.demands
    bounds = [(a, min(a + chunk, reps)) for a in range(0, reps, chunk)]

    def run(b):
        return _chunk(demands, amounts, seed, b[0], b[1])

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]

    # Chan et al. pairwise combination, in chunk order
    count, mean, m2 = 0, 0.0, 0.0
    served = [0.0] * len(demands)
    for size, c_mean, c_m2, c_served in parts:
        new = count + size
        delta = c_mean - mean
        mean += delta * size / new
        m2 += c_m2 + delta * delta * count * size / new
        count = new
        served = [a + b for a, b in zip(served, c_served)]
    stderr = math.sqrt(m2 / (count - 1) / count) if count > 1 else 0.0
    q_hat = tuple(s / count / dist.mean(d) for s, d in zip(served, demands))
    return MonteCarloEstimate(mean, stderr, q_hat)
