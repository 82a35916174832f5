"""Allocation instances and allocation vectors."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

from .distributions import Demand, Discrete, demand_from_dict, demand_to_dict, is_continuous


class Mode(str, enum.Enum):
    INTEGER = "integer"
    FRACTIONAL = "fractional"


@dataclass(frozen=True)
class Group:
    name: str
    demand: Demand


@dataclass(frozen=True)
class Instance:
    """Groups with stochastic demand sharing one budget."""

    groups: tuple[Group, ...]
    budget: float
    mode: Mode = Mode.FRACTIONAL

    def __post_init__(self) -> None:
        groups = tuple(self.groups)
        if not groups:
            raise ValueError("an instance needs at least one group")
        budget = float(self.budget)
        if not (math.isfinite(budget) and budget >= 0.0):
            raise ValueError(f"budget must be finite and >= 0, got {self.budget!r}")
        mode = Mode(self.mode)
        if mode is Mode.INTEGER and not budget.is_integer():
            raise ValueError(f"integer allocation needs an integer budget, got {budget!r}")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "budget", budget)
        object.__setattr__(self, "mode", mode)

    @classmethod
    def of(cls, demands: Sequence[Demand], budget: float, mode: Mode | str = Mode.FRACTIONAL,
           names: Sequence[str] | None = None) -> "Instance":
        if names is None:
            names = [f"g{i}" for i in range(len(demands))]
        return cls(tuple(Group(n, d) for n, d in zip(names, demands)), budget, Mode(mode))

    @property
    def demands(self) -> tuple[Demand, ...]:
        return tuple(g.demand for g in self.groups)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.groups)

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def all_discrete(self) -> bool:
        return all(isinstance(d, Discrete) for d in self.demands)

    @property
    def all_continuous(self) -> bool:
        return all(is_continuous(d) for d in self.demands)

    def with_budget(self, budget: float) -> "Instance":
        return replace(self, budget=budget)

    def with_mode(self, mode: Mode | str) -> "Instance":
        return replace(self, mode=Mode(mode))


@dataclass(frozen=True)
class Allocation:
    amounts: tuple[float, ...]

    def __post_init__(self) -> None:
        amounts = tuple(float(a) for a in self.amounts)
        for a in amounts:
            if not a >= 0.0:
                raise ValueError(f"allocation amounts must be >= 0, got {a!r}")
        object.__setattr__(self, "amounts", amounts)

    def __len__(self) -> int:
        return len(self.amounts)

    def __iter__(self) -> Iterator[float]:
        return iter(self.amounts)

    def __getitem__(self, i: int) -> float:
        return self.amounts[i]

    @property
    def total(self) -> float:
        return math.fsum(self.amounts)

    def is_integral(self) -> bool:
        return all(a.is_integer() for a in self.amounts)


def as_amounts(inst: Instance, alloc) -> tuple[float, ...]:
    """Validate ``alloc`` (an Allocation or plain sequence) against ``inst``."""
    amounts = alloc.amounts if isinstance(alloc, Allocation) else tuple(float(a) for a in alloc)
    if len(amounts) != len(inst.groups):
        raise ValueError(f"allocation has {len(amounts)} entries for {len(inst.groups)} groups")
    for a in amounts:
        if not a >= 0.0:
            raise ValueError(f"allocation amounts must be >= 0, got {a!r}")
    return amounts


class ScenarioError(ValueError):
    """Malformed scenario document; the message names the offending field."""


def instance_to_dict(inst: Instance) -> dict:
    return {
        "budget": inst.budget,
        "mode": inst.mode.value,
        "groups": [{"name": g.name, "distribution": demand_to_dict(g.demand)} for g in inst.groups],
    }


def instance_from_dict(obj) -> Instance:
    """Parse a scenario document: ``{"budget", "mode", "groups": [{"name", "distribution"}]}``."""
    if not isinstance(obj, dict):
        raise ScenarioError("scenario must be a JSON object")
    for key in ("budget", "mode", "groups"):
        if key not in obj:
            raise ScenarioError(f"missing field '{key}'")
    budget = obj["budget"]
    if isinstance(budget, bool) or not isinstance(budget, (int, float)):
        raise ScenarioError("budget: must be a number")
    mode = obj["mode"]
    if mode not in (m.value for m in Mode):
        raise ScenarioError(f"mode: must be 'integer' or 'fractional', got {mode!r}")
    groups = obj["groups"]
    if not isinstance(groups, list) or not groups:
        raise ScenarioError("groups: must be a non-empty list")
    parsed = []
    for i, g in enumerate(groups):
        where = f"groups[{i}]"
        if not isinstance(g, dict):
            raise ScenarioError(f"{where}: must be an object")
        name = g.get("name", f"g{i}")
        if not isinstance(name, str):
            raise ScenarioError(f"{where}.name: must be a string")
        if "distribution" not in g:
            raise ScenarioError(f"{where}: missing field 'distribution'")
        try:
            demand = demand_from_dict(g["distribution"])
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"{where}.distribution: {exc}") from None
        parsed.append(Group(name, demand))
    try:
        return Instance(tuple(parsed), float(budget), Mode(mode))
    except ValueError as exc:
        raise ScenarioError(f"budget: {exc}") from None
