import itertools
import math

import numpy as np
import pytest

from repdel.agents import (
    AdversarialAgent,
    AgentObservation,
    BudgetExceeded,
    HidingAgent,
    MyopicAgent,
    ScriptedAgent,
    adversarial_response,
    best_response,
    build_agent,
    eps_best_response_set,
    lookahead_oracle,
    lookahead_oracle_agent,
    policy_value,
    should_reveal,
)
from repdel.core import EligibleSet, InvalidParameter, Realization, RoundRecord, round_outcome
from repdel.instances import InstanceModel, appendix_k, p1
from repdel.mechanisms import DelayedIterativeSearch, IterativeSearch


def R(*pts):
    return Realization(1, [p[0] for p in pts], [p[1] for p in pts])


def test_best_response_examples():
    assert best_response(R((0.1, 1.0), (0.2, 0.01)), EligibleSet.inclusive(0)) == 0
    assert best_response(R((0.5, 0.5)), EligibleSet.strict(0.9)) is None
    assert best_response(R((0.3, 0.7), (0.6, 0.7)), EligibleSet.inclusive(0)) == 1


def test_zero_solution_only_beats_null_when_principal_gains():
    assert best_response(R((0.0, 0.0)), EligibleSet.accept_all()) is None
    assert best_response(R((0.2, 0.0)), EligibleSet.accept_all()) == 0


def test_eps_set_examples():
    real = R((0.5, 0.2), (0.6, 0.18), (0.2, 0.9))
    E = EligibleSet.inclusive(0.3)
    s = eps_best_response_set(real, E, 0.05)
    assert s == frozenset({0, 1})
    assert eps_best_response_set(real, E, 0.0) == frozenset({best_response(real, E)})
    assert eps_best_response_set(real, EligibleSet.accept_none(), 0.1) == frozenset({None})
    assert adversarial_response(real, E, 0.05) == 0


def test_adversarial_prefers_null_when_allowed():
    real = R((0.4, 0.03))
    assert None in eps_best_response_set(real, EligibleSet.accept_all(), 0.05)
    assert adversarial_response(real, EligibleSet.accept_all(), 0.05) is None


def test_should_reveal_examples():
    assert should_reveal(3, 10, 0.9, 0.05)
    assert not should_reveal(3, 0, 0.9, 0.05)
    assert all(should_reveal(1, K, 0.5, 0.5) for K in range(20))
    with pytest.raises(InvalidParameter):
        should_reveal(1, -1, 0.9, 0.1)


def _obs(real, E, t=1):
    return AgentObservation(real, E, t, [], None)


def test_hiding_agent_examples():
    inst = p1(0.1, 1e-14)
    real = inst.realization(1)
    a = HidingAgent("P1", 0.9, 280)
    assert a.act(_obs(real, EligibleSet.inclusive(0))) == 0
    assert a.act(_obs(real, EligibleSet.strict(0.1))) is None
    k = appendix_k(0.1).realization(1)
    assert HidingAgent("nondiscounting", 0.999).act(_obs(k, EligibleSet.inclusive(0.4))) == 0


def test_hiding_agent_reveals_when_worth_it():
    inst = InstanceModel.deterministic([(0.1, 1.0), (0.2, 0.5)])
    a = HidingAgent("P1", 0.9, 10)
    assert a.act(_obs(inst.realization(1), EligibleSet.strict(0.1))) == 1
    assert a.revealed


def test_single_solution_agent_always_proposes_when_eligible():
    inst = InstanceModel.deterministic([(0.4, 0.6)])
    res = lookahead_oracle(inst, IterativeSearch, 6, 0.9)
    for E, a in zip(res.sets, res.actions):
        assert (a == 0) == E.contains_xy(0.4, 0.6)


def _brute_force(instance, factory, horizon, gamma):
    """Value of every action sequence, simulated from scratch (no memoisation)."""
    real = instance.realization(1)
    K = instance.K
    best = -math.inf
    values = {}
    for seq in itertools.product([None] + list(range(K)), repeat=horizon):
        m = factory()
        recs = []
        total = 0.0
        for t, a in enumerate(seq, start=1):
            E = m.announce(t, recs)
            acc, x, y = round_outcome(E, real, a)
            recs.append(RoundRecord(t, E, a, acc, x, y, gamma ** (t - 1) * y))
            total += gamma ** (t - 1) * y
        values[seq] = total
        best = max(best, total)
    return best, values


def test_oracle_matches_brute_force_on_p1():
    inst = p1(0.1, 1e-14)
    best, values = _brute_force(inst, IterativeSearch, 8, 0.9)
    res = lookahead_oracle(inst, IterativeSearch, 8, 0.9)
    assert res.value == pytest.approx(best, abs=1e-15)
    assert values[tuple(res.actions)] == pytest.approx(best, abs=1e-15)
    hiding = policy_value(inst, IterativeSearch, HidingAgent("P1", 0.9, 280), 8, 0.9)
    revealing = policy_value(inst, IterativeSearch, MyopicAgent(), 8, 0.9)
    assert hiding > revealing
    assert hiding == pytest.approx(best, abs=1e-15)


def test_oracle_matches_brute_force_with_delay():
    inst = InstanceModel.deterministic([(0.2, 0.9), (0.6, 0.4), (0.9, 0.1)])
    f = lambda: DelayedIterativeSearch(0.5, 0.1, D=2)
    best, _ = _brute_force(inst, f, 6, 0.7)
    assert lookahead_oracle(inst, f, 6, 0.7).value == pytest.approx(best, abs=1e-12)


def test_oracle_eps_restriction_and_agent():
    inst = appendix_k(0.1)
    free = lookahead_oracle(inst, IterativeSearch, 6, 0.999)
    tied = lookahead_oracle(inst, IterativeSearch, 6, 0.999, eps=0.0)
    assert tied.value <= free.value + 1e-12
    agent, value = lookahead_oracle_agent(inst, IterativeSearch, 6, 0.999)
    assert isinstance(agent, ScriptedAgent)
    assert policy_value(inst, IterativeSearch, agent, 6, 0.999) == pytest.approx(value)


def test_oracle_budget():
    inst = InstanceModel.deterministic([(0.1 * i, 1 - 0.1 * i) for i in range(1, 6)])
    with pytest.raises(BudgetExceeded):
        lookahead_oracle(inst, IterativeSearch, 10, 0.9, node_limit=5)
    with pytest.raises(InvalidParameter):
        lookahead_oracle(inst, IterativeSearch, 13, 0.9)


def test_build_agent_registry():
    assert isinstance(build_agent("adversarial", {"eps": 0.1}), AdversarialAgent)
    with pytest.raises(InvalidParameter):
        build_agent("nobody")
