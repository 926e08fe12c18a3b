import math

import numpy as np
import pytest

from repdel.core import InvalidParameter
from repdel.engine import MechanismSpec, SimulationConfig, run_simulation
from repdel.instances import InstanceModel
from repdel.rppm import ConstantPricer, KLAdapter, KLPricer, RppmEnvironment, delegation_adapter, run_rppm


def test_constant_pricer():
    env = RppmEnvironment(0.6, 100)
    assert run_rppm(ConstantPricer(0.6), env).regret == pytest.approx(0.0)
    assert run_rppm(ConstantPricer(0.7), env).regret == pytest.approx(60.0)


@pytest.mark.parametrize("v", [0.0, 0.2, 0.5, 0.73, 0.95, 1.0])
def test_kl_pricer_final_price_brackets_value(v):
    T = 2 ** 16
    pr = KLPricer(T)
    res = run_rppm(pr, RppmEnvironment(v, T))
    assert pr.committed
    assert v - 1 / T <= pr.final_price <= v
    assert res.regret <= 8 * math.log2(math.log2(T))


def test_kl_pricer_boundaries():
    pr = KLPricer(1024)
    res = run_rppm(pr, RppmEnvironment(1.0, 1024))
    assert res.sold.all()
    assert pr.final_price >= 1 - 1 / 1024
    pr = KLPricer(1024)
    res = run_rppm(pr, RppmEnvironment(0.0, 1024))
    assert not res.sold[0]
    assert pr.final_price == 0.0


def test_kl_regret_grows_slowly():
    ratios = []
    for e in (10, 16, 22):
        T = 2 ** e
        ratios.append(run_rppm(KLPricer(T), RppmEnvironment(0.73, T)).regret / math.log2(math.log2(T)))
    assert max(ratios) / min(ratios) <= 2


def test_adapter_coupling_single_solution():
    T = 4096
    inst = InstanceModel.deterministic([(0.73, 0.5)])
    res = run_simulation(SimulationConfig(inst, MechanismSpec("kl_adapter"), T=T))
    pr = run_rppm(KLPricer(T), RppmEnvironment(0.73, T))
    np.testing.assert_array_equal(res.history.accepted, pr.sold)
    taus = np.array([s.tau for s in res.history.sets])[res.history.set_ids]
    np.testing.assert_array_equal(taus, pr.prices)


def test_adapter_utility_dominates_price():
    T = 4096
    inst = InstanceModel.deterministic([(0.3, 0.9), (0.73, 0.1)])
    res = run_simulation(SimulationConfig(inst, MechanismSpec("kl_adapter"), T=T))
    pr = run_rppm(KLPricer(T), RppmEnvironment(0.73, T))
    np.testing.assert_array_equal(res.history.accepted, pr.sold)
    assert np.all(res.history.principal_utilities >= pr.revenue)
    assert res.regret <= pr.regret + 1e-9


def test_adapter_price_zero_gets_max_y():
    inst = InstanceModel.deterministic([(0.3, 0.9), (0.73, 0.1)])
    res = run_simulation(SimulationConfig(inst, lambda: delegation_adapter(ConstantPricer(0.0), 10), T=10))
    assert res.history.principal_utilities.tolist() == [0.3] * 10


def test_validation():
    with pytest.raises(InvalidParameter):
        KLPricer(1)
    with pytest.raises(InvalidParameter):
        RppmEnvironment(1.5, 10)
    with pytest.raises(RuntimeError):
        pr = KLPricer(10)
        pr.propose()
        pr.propose()
