import json

import pytest

from fairalloc import oracles, solvers
from fairalloc.generators import adversarial_discrete, adversarial_fractional, measured_pof
from fairalloc.instance import Mode, instance_from_dict
from fairalloc.metrics import service_profile, utilization


class TestDiscrete:
    def test_half_two(self):
        res = adversarial_discrete(0.5, 2)
        p = res.construction_params
        assert (p["n"], p["n_prime"], p["m_prime"], p["B"]) == (2, 1, 4, 6)
        assert len(res.instance) == 8 and res.instance.mode is Mode.INTEGER
        assert measured_pof(res) == pytest.approx(6.0)

    def test_half_one(self):
        res = adversarial_discrete(0.5, 1)
        assert res.construction_params["m_prime"] == 2 and res.construction_params["B"] == 4
        assert measured_pof(res) == pytest.approx(4.0)

    def test_reciprocal_integer(self):
        res = adversarial_discrete(0.25, 1)
        assert res.construction_params["n"] == 4 and res.construction_params["n_prime"] == 3

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.2, 1.5])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ValueError):
            adversarial_discrete(eps, 2)

    def test_bad_rho(self):
        with pytest.raises(ValueError):
            adversarial_discrete(0.5, 0.5)

    def test_fair_value_positive(self):
        for eps in (0.05, 0.3, 0.7, 0.95):
            p = adversarial_discrete(eps, 1).construction_params
            assert int(eps * p["n"] + 1e-12) >= 1


class TestFractional:
    def test_rho_two(self):
        res = adversarial_fractional(2.0)
        p = res.construction_params
        assert (p["n1"], p["n2"], p["p2"], p["B"]) == (4, 16, 0.125, 4)
        fair = solvers.fair_exact_zero(res.instance)
        assert fair.allocation.amounts == pytest.approx((0.8, 3.2), abs=1e-9)
        assert fair.utilization == pytest.approx(0.8, abs=1e-12)
        assert measured_pof(res) == pytest.approx(2.5, abs=1e-9)

    def test_k_two(self):
        res = adversarial_fractional(2.0, k=2)
        assert res.construction_params["n1"] == 8
        assert measured_pof(res) == pytest.approx(2.25, abs=1e-9)

    def test_fair_gap_zero(self):
        for rho in (1.1, 3.0, 7.5):
            res = adversarial_fractional(rho, 1.5, 0.3)
            fair = solvers.fair_exact_zero(res.instance.with_budget(res.construction_params["fair_budget"]))
            assert fair.profile.gap <= 1e-9

    def test_linear_service(self):
        res = adversarial_fractional(3.0, 1.0, 0.2)
        p = res.construction_params
        for r in (0.0, 1.3, p["n1"] * 0.9):
            q = service_profile(res.instance, (r, r)).q_values
            assert q[0] == pytest.approx(r / p["n1"], abs=1e-12)
            assert q[1] == pytest.approx(r / p["n2"], abs=1e-12)

    @pytest.mark.parametrize("kwargs", [dict(rho=1.0), dict(rho=0.5), dict(rho=2, k=0.5), dict(rho=2, p1=1.0)])
    def test_bad_params(self, kwargs):
        with pytest.raises(ValueError):
            adversarial_fractional(**kwargs)


def test_json_form_round_trips():
    res = adversarial_fractional(2.0)
    doc = json.loads(json.dumps(res.to_dict()))
    assert doc["meta"]["n1"] == 4
    assert instance_from_dict(doc) == res.instance
