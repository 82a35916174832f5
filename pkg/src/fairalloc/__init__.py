"""Allocating a fixed budget across groups with random demand, with and without fairness."""

from .distributions import (
    Discrete, Exponential, Lomax, Weibull, cdf, expected_min, inverse_service_prob, mean,
    quantile, service_prob, survival,
)
from .generators import AdversarialResult, adversarial_discrete, adversarial_fractional
from .instance import Allocation, Group, Instance, Mode
from .metrics import (
    PofReport, ServiceProfile, bound_inverse_epsilon, bound_powerlaw, price_of_fairness,
    scaled_family_check, service_profile, utilization,
)
from .oracles import (
    OracleResult, exhaustive_discrete_fair, exhaustive_discrete_max, grid_fractional, monte_carlo,
)
from .solvers import (
    SolveReport, clamp_to_fair, fair_band, fair_exact_zero, greedy_discrete, max_utilization,
    top_up, waterfill_continuous,
)

__version__ = "0.1.0"
