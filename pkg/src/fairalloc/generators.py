"""Instances whose Price of Fairness provably exceeds a requested level.

Parameters are read through their decimal representation so that inputs such
as ``epsilon=0.2`` hit integer thresholds exactly rather than off by one ulp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .distributions import Discrete
from .instance import Instance, Mode, instance_to_dict


@dataclass(frozen=True)
class AdversarialResult:
    instance: Instance
    pof_lower_bound: float
    construction_params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = instance_to_dict(self.instance)
        out["meta"] = {"pof_lower_bound": self.pof_lower_bound, **self.construction_params}
        return out


def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def _point_mass(count: int) -> Discrete:
    return Discrete(((count, 1.0),))


def adversarial_discrete(epsilon: float, rho: float) -> AdversarialResult:
    """Integer instance with one high-demand group and many low-demand groups.

    Every group's demand is deterministic.  A low group given even one unit
    is served with probability ``1/n' > epsilon``, so a fair allocation must
    leave all of them empty and can give the high group only
    ``floor(epsilon * n)`` units, while the unconstrained optimum serves ``B``.
    """
    eps, r = _exact(epsilon), _exact(rho)
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie strictly between 0 and 1, got {epsilon!r}")
    if not r >= 1:
        raise ValueError(f"rho must be >= 1, got {rho!r}")
    inv = 1 / eps
    n = math.ceil(inv)
    n_low = inv.numerator - 1 if inv.denominator == 1 else math.floor(inv)
    m_low = math.floor(r * eps * (1 + eps) / (1 - eps)) + 1
    budget = n + n_low * m_low
    groups = [_point_mass(n)] + [_point_mass(n_low)] * (budget + 1)
    names = ["high"] + [f"low{i}" for i in range(budget + 1)]
    inst = Instance.of(groups, budget, Mode.INTEGER, names)
    params = {"kind": "discrete", "epsilon": float(epsilon), "rho": float(rho), "n": n,
              "n_prime": n_low, "m_prime": m_low, "m": budget + 1, "B": budget,
              "predicted_pof": budget / math.floor(eps * n)}
    return AdversarialResult(inst, float(rho), params)


def adversarial_fractional(rho: float, k: float = 1.0, p1: float = 0.5) -> AdversarialResult:
    """Two two-point groups where exact fairness costs more than ``rho``.

    Group ``i`` needs ``n_i`` units with probability ``p_i`` and none
    otherwise, with ``n2 = n1**2`` and ``p2 = p1 / n1``.  The budget ``n1``
    fully serves group 1; the equal-service allocation, even with ``k`` times
    the budget, only reaches ``2k / (1 + n1)`` of that.
    """
    r, kk, p = _exact(rho), _exact(k), float(p1)
    if not r > 1:
        raise ValueError(f"rho must exceed 1, got {rho!r}")
    if not kk >= 1:
        raise ValueError(f"k must be >= 1, got {k!r}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p1 must lie strictly between 0 and 1, got {p1!r}")
    n1 = math.floor(2 * kk * r - 1) + 1
    n2 = n1 * n1
    p2 = p / n1
    groups = [Discrete(((0, 1.0 - p), (n1, p))), Discrete(((0, 1.0 - p2), (n2, p2)))]
    inst = Instance.of(groups, n1, Mode.FRACTIONAL, ["g1", "g2"])
    params = {"kind": "fractional", "rho": float(rho), "k": float(k), "n1": n1, "n2": n2,
              "p1": p, "p2": p2, "B": n1, "fair_budget": float(k) * n1,
              "predicted_pof": (1 + n1) / (2 * float(k))}
    return AdversarialResult(inst, float(rho), params)


def measured_pof(result: AdversarialResult) -> float:
    """PoF of a generated instance computed by the solvers and oracles.

    Discrete constructions use the exhaustive fair oracle; fractional ones
    compare the max-utilization optimum at budget ``B`` to the equal-service
    optimum at budget ``k * B``.
    """
    from . import metrics, solvers

    params = result.construction_params
    if params.get("kind") == "discrete":
        return metrics.price_of_fairness(result.instance, params["epsilon"]).pof
    inst = result.instance
    u_max = solvers.max_utilization(inst).utilization
    u_fair = solvers.fair_exact_zero(inst.with_budget(params["fair_budget"])).utilization
    return u_max / u_fair
