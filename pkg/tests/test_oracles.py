import math

import pytest
from hypothesis import given, settings, strategies as st

from fairalloc import oracles, solvers
from fairalloc.distributions import Discrete, Exponential, Lomax
from fairalloc.generators import adversarial_discrete
from fairalloc.instance import Instance, Mode
from fairalloc.metrics import service_profile, utilization
from fairalloc.oracles import (
    EnumerationTooLarge, OracleMode, exhaustive_discrete_fair, exhaustive_discrete_max, grid_fractional,
    monte_carlo,
)

from conftest import VILLAGE_A, VILLAGE_B
from test_distributions import discretes


class TestExhaustive:
    def test_village_max(self, village):
        res = exhaustive_discrete_max(village)
        assert res.best_allocation.amounts == (0.0, 2.0)
        assert res.best_value == pytest.approx(1.4, abs=1e-12)
        assert res.evaluated == 3 and res.mode is OracleMode.EXHAUSTIVE_INTEGER

    def test_zero_budget(self, village):
        res = exhaustive_discrete_max(village.with_budget(0))
        assert res.best_allocation.amounts == (0.0, 0.0) and res.best_value == 0.0

    def test_adversarial_count(self):
        inst = adversarial_discrete(0.5, 2).instance
        res = exhaustive_discrete_max(inst)
        assert res.evaluated == math.comb(6 + 8 - 1, 8 - 1) == 1716
        assert res.best_value == 6.0

    def test_village_fair(self, village):
        res = exhaustive_discrete_fair(village, 0.2)
        assert res.best_allocation.amounts == (1.0, 1.0)
        assert res.best_value == pytest.approx(1.1, abs=1e-12)

    def test_adversarial_fair(self):
        inst = adversarial_discrete(0.5, 2).instance
        assert exhaustive_discrete_fair(inst, 0.5).best_value == 1.0

    def test_full_budget_can_be_infeasible(self):
        inst = adversarial_discrete(0.5, 2).instance
        res = exhaustive_discrete_fair(inst, 0.5, full_budget=True)
        assert not res.feasible and res.best_value == 0.0

    def test_symmetry_reduction_agrees(self):
        inst = adversarial_discrete(0.4, 2).instance
        full = exhaustive_discrete_fair(inst, 0.4)
        reduced = exhaustive_discrete_fair(inst, 0.4, reduce_symmetry=True)
        assert reduced.best_value == full.best_value
        assert reduced.evaluated < full.evaluated

    def test_guard(self):
        d = Discrete(((0, 0.5), (1, 0.5)))
        inst = Instance.of([d] * 30, 40, Mode.INTEGER)
        with pytest.raises(EnumerationTooLarge):
            exhaustive_discrete_max(inst)

    def test_candidate_count(self, village):
        assert oracles.candidate_count(village) == 3
        assert oracles.candidate_count(village, up_to_budget=True) == 6

    def test_fractional_rejected(self, village_frac):
        with pytest.raises(ValueError):
            exhaustive_discrete_max(village_frac)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(discretes(6), min_size=1, max_size=4), st.integers(0, 8), st.floats(0, 1))
    def test_fair_value_consistency(self, ds, budget, eps):
        inst = Instance.of(ds, budget, Mode.INTEGER)
        res = exhaustive_discrete_fair(inst, eps)
        assert res.best_value == pytest.approx(utilization(inst, res.best_allocation), abs=1e-12)
        prof = service_profile(inst, res.best_allocation)
        assert prof.gap <= eps + 1e-12
        assert res.best_value <= exhaustive_discrete_max(inst).best_value + 1e-12
        sym = exhaustive_discrete_fair(inst, eps, reduce_symmetry=True)
        assert sym.best_value == pytest.approx(res.best_value, abs=1e-12)

    def test_epsilon_one_matches_max(self, village):
        assert exhaustive_discrete_fair(village, 1.0).best_value == exhaustive_discrete_max(village).best_value


class TestGrid:
    def test_village_zero(self, village_frac):
        res = grid_fractional(village_frac, 0.0, 1e-3)
        assert res.best_allocation.amounts == pytest.approx((0.8, 1.2), abs=1e-3)
        assert res.best_value == pytest.approx(1.16, abs=1e-3)

    def test_village_band(self, village_frac):
        res = grid_fractional(village_frac, 0.2, 1e-3)
        assert res.best_allocation.amounts == pytest.approx((0.56, 1.44), abs=1e-3)
        assert res.best_value == pytest.approx(1.232, abs=1e-3)

    def test_single_group(self):
        inst = Instance.of([Lomax(2.0)], 1.5)
        res = grid_fractional(inst, None, 2.0)
        assert res.best_allocation.amounts == (1.5,)
        assert res.best_value == pytest.approx(utilization(inst, (1.5,)))

    def test_guard(self):
        inst = Instance.of([Exponential(1.0)] * 4, 10.0)
        with pytest.raises(EnumerationTooLarge):
            grid_fractional(inst, None, 1e-3)

    def test_budget_used(self):
        inst = Instance.of([VILLAGE_A, VILLAGE_B, Exponential(2.0)], 1.234)
        res = grid_fractional(inst, 0.3, 0.01)
        assert res.best_allocation.total == pytest.approx(1.234, abs=1e-12)
        assert res.best_value == pytest.approx(utilization(inst, res.best_allocation), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.one_of(discretes(5), st.builds(Exponential, st.floats(0.2, 5))), min_size=2, max_size=3),
           st.floats(0.0, 4.0))
    def test_never_beats_solver_beyond_slack(self, ds, b):
        inst = Instance.of(ds, b)
        res = grid_fractional(inst, None, 0.05)
        assert res.best_value <= solvers.max_utilization(inst).utilization + oracles.grid_slack(inst, 0.05)


class TestMonteCarlo:
    def test_village_one_one(self, village):
        est = monte_carlo(village, (1, 1), 10**6, seed=11)
        assert abs(est.util_estimate - 1.1) <= 3 * est.util_stderr

    def test_village_q(self, village):
        est = monte_carlo(village, (0, 2), 10**6, seed=5)
        # q for B is a ratio of means; use the binomial-style spread of served units
        q_b = est.q_estimates[1]
        assert q_b == pytest.approx(2 / 3, abs=3 * est.util_stderr / 2.1)

    def test_single_draw_reproducible(self, village):
        assert monte_carlo(village, (1, 1), 1, seed=3) == monte_carlo(village, (1, 1), 1, seed=3)

    def test_thread_count_irrelevant(self):
        inst = Instance.of([Exponential(1.0), Lomax(2.5), VILLAGE_A], 3.0)
        one = monte_carlo(inst, (1.0, 1.0, 0.7), 300_000, seed=9, workers=1)
        four = monte_carlo(inst, (1.0, 1.0, 0.7), 300_000, seed=9, workers=4)
        assert one == four

    def test_chunking_irrelevant_to_draws(self, village):
        a = monte_carlo(village, (0.5, 1.5), 100_000, seed=2, chunk=4096)
        b = monte_carlo(village, (0.5, 1.5), 100_000, seed=2)
        assert a.util_estimate == pytest.approx(b.util_estimate, rel=1e-12)
        assert a.q_estimates == pytest.approx(b.q_estimates, rel=1e-12)

    def test_seed_matters(self, village):
        assert monte_carlo(village, (1, 1), 1000, seed=1) != monte_carlo(village, (1, 1), 1000, seed=2)

    def test_fractional_rounding(self, village_frac):
        est = monte_carlo(village_frac, (0.5, 1.5), 10**6, seed=4)
        assert abs(est.util_estimate - utilization(village_frac, (0.5, 1.5))) <= 4 * est.util_stderr

    @pytest.mark.parametrize("reps", [0, -3])
    def test_bad_reps(self, village, reps):
        with pytest.raises(ValueError):
            monte_carlo(village, (1, 1), reps, seed=0)

    def test_convergence_rate(self):
        inst = Instance.of([Exponential(1.0), Exponential(2.0)], 3.0)
        exact = utilization(inst, (2.0, 1.0))
        hits = sum(abs((e := monte_carlo(inst, (2.0, 1.0), 4000, seed=s)).util_estimate - exact)
                   <= 4 * e.util_stderr for s in range(200))
        assert hits >= 198
