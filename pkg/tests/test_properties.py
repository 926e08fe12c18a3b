import copy
import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from repdel.agents import adversarial_response, best_response, eps_best_response_set
from repdel.core import EligibleSet, Outcome, Realization
from repdel.engine import AgentSpec, MechanismSpec, SimulationConfig, run_simulation
from repdel.instances import (
    InstanceModel,
    RealizationStream,
    check_d_dense,
    check_lipschitz,
    generate_deterministic_chain,
    two_uniform_complement,
)
from repdel.mechanisms import (
    DelayedBinarySearch,
    DelayedProgressiveSearch,
    DelayWrapper,
    IterativeSearch,
    SuccessiveEliminationDelayed,
)

unit = st.floats(0.0, 1.0, allow_nan=False)
grid = st.integers(0, 20).map(lambda i: i / 20)  # coarse values make ties common
points = st.lists(st.tuples(st.one_of(unit, grid), st.one_of(unit, grid)), min_size=0, max_size=6)
sets = st.one_of(
    st.builds(EligibleSet.inclusive, st.one_of(unit, grid)),
    st.builds(EligibleSet.strict, st.one_of(unit, grid)),
    st.just(EligibleSet.accept_all()),
    st.just(EligibleSet.accept_none()),
)


def real(pts):
    return Realization(1, [p[0] for p in pts], [p[1] for p in pts])


@given(points, sets, st.floats(0, 1), st.floats(0, 1))
def test_eps_sets_grow_with_eps(pts, E, e1, e2):
    lo, hi = sorted((e1, e2))
    r = real(pts)
    assert eps_best_response_set(r, E, lo) <= eps_best_response_set(r, E, hi)


@given(points, sets, st.floats(0, 1))
def test_best_response_is_in_every_eps_set(pts, E, eps):
    r = real(pts)
    br = best_response(r, E)
    assert br in eps_best_response_set(r, E, eps)
    assert br is None or E.contains_xy(*pts[br])


@given(points, sets, st.floats(0, 1))
def test_adversary_never_helps_the_principal(pts, E, eps):
    r = real(pts)
    br, adv = best_response(r, E), adversarial_response(r, E, eps)
    x = lambda p: 0.0 if p is None else pts[p][0]
    assert x(adv) <= x(br)
    assert adv in eps_best_response_set(r, E, eps)


@given(st.one_of(unit, grid), st.sampled_from(["inclusive", "strict"]))
def test_label_round_trip(tau, kind):
    E = getattr(EligibleSet, kind)(tau)
    assert EligibleSet.from_label(E.label) == E


@given(st.integers(1, 12), st.floats(0.005, 0.08), st.floats(0.5, 1.0), st.floats(0.0, 0.5),
       st.floats(0.0, 0.3), st.integers(0, 2 ** 32 - 1))
def test_chain_generator_passes_checkers(K, d, L1, spread, y_min, seed):
    L2 = L1 * (1 + spread)
    assume(K * d <= 1 and y_min + L2 * (K - 1) * d < 1)
    inst = generate_deterministic_chain(K, d, L1, L2, y_min, seed=seed)
    assert check_d_dense(inst, d)
    assert check_lipschitz(inst, L1, L2)
    assert inst.ys.min() >= y_min


@given(points.filter(lambda p: len(p) > 0), st.sampled_from(["iterative_search", "kl_adapter", "ucb_threshold"]),
       st.integers(2, 300))
def test_accounting_identity(pts, name, T):
    inst = InstanceModel.deterministic(pts)
    res = run_simulation(SimulationConfig(inst, MechanismSpec(name), T=T))
    total = res.history.principal_utilities.sum()
    assert abs(total + res.regret - T * res.benchmark.opt_per_round) <= 1e-9 * max(1, T)
    assert res.regret >= -1e-9


@given(st.lists(st.tuples(unit, st.floats(0.2, 1.0)), min_size=1, max_size=5), st.floats(0, 0.19),
       st.integers(2, 2000))
def test_binary_search_interval_brackets_max(pts, eps, T):
    inst = InstanceModel.deterministic(pts)
    m = DelayedBinarySearch(0.9, 0.2, T, D=2)
    run_simulation(SimulationConfig(inst, lambda: m, AgentSpec("adversarial", {"eps": eps}), T=T), fast=False)
    mx = inst.xs.max()
    assert m.l <= mx <= m.r or (m.committed and m.l <= mx)
    if m.committed:
        assert mx - 1 / T <= m.l + 1e-15


@given(st.integers(1, 6), st.integers(0, 15), st.floats(0, 0.2), st.integers(0, 1000))
def test_eliminated_arms_stay_out(Q, D, delta, seed):
    T = 1500
    m = SuccessiveEliminationDelayed(Q, D, delta, T)
    run_simulation(SimulationConfig(two_uniform_complement(), lambda: m, T=T, seed=seed), fast=False)
    arms = np.asarray(m.arms)
    assert len(m.active) >= 1
    for i, when in enumerate(m.eliminated):
        if when:
            assert i not in m.active
            assert not np.any(arms[when - 1:] == i)
        else:
            assert i in m.active


@given(st.lists(st.integers(0, 700), min_size=1, max_size=8))
def test_stream_chunking(cuts):
    inst = two_uniform_complement()
    a = RealizationStream(inst, np.random.default_rng(1), chunk=256)
    b = RealizationStream(inst, np.random.default_rng(1), chunk=256)
    whole = a.take(sum(cuts))[0]
    pieces = [b.take(c)[0] for c in cuts]
    np.testing.assert_array_equal(whole, np.concatenate(pieces))


@given(st.integers(2, 8), st.integers(10, 60), st.data())
def test_wrapper_ignores_recent_rounds(D, t, data):
    inst = InstanceModel.deterministic([(0.2, 0.9), (0.5, 0.6), (0.8, 0.3)])
    h = run_simulation(SimulationConfig(inst, lambda: DelayWrapper(IterativeSearch(), D), T=t), fast=False).history
    w = DelayWrapper(IterativeSearch(), D)
    for s in range(1, t):
        w.announce(s, h.view(s - 1))
    mut = h.copy()
    for r in data.draw(st.lists(st.integers(t - D + 1, t - 1), min_size=1, max_size=4)):
        mut.overwrite(r - 1, None, Outcome(False, 0.0, 0.0), math.nan, math.nan)
    assert copy.deepcopy(w).announce(t, h.view(t - 1)) == copy.deepcopy(w).announce(t, mut.view(t - 1))


def _track(cls):
    class Tracked(cls):
        def announce(self, t, visible):
            out = super().announce(t, visible)
            self.trail = getattr(self, "trail", []) + [(self.l, self.r)]
            return out
    return Tracked


@given(st.integers(1, 15), st.sampled_from([0.02, 0.05]), st.integers(0, 10_000), st.floats(0, 1),
       st.sampled_from(["fixed", "adaptive"]))
def test_interval_invariants(K, d, seed, eps_frac, schedule):
    assume(K * d <= 1)
    inst = generate_deterministic_chain(K, d, 1.0, 1.2, 0.05, seed=seed)
    xs = set(inst.xs.tolist())
    dps = _track(DelayedProgressiveSearch)(0.9, 1.0, 1.2, d, schedule=schedule, D=3)
    dbs = _track(DelayedBinarySearch)(0.9, 0.05, 400, D=3)
    for m, eps in ((dps, eps_frac * dps.eps), (dbs, eps_frac * 0.049)):
        run_simulation(SimulationConfig(inst, lambda: m, AgentSpec("adversarial", {"eps": eps}), T=400), fast=False)
        ls, rs = zip(*m.trail)
        assert all(0 <= l <= r <= 1 for l, r in m.trail)
        assert all(a <= b for a, b in zip(ls, ls[1:]))
        assert all(a >= b for a, b in zip(rs, rs[1:]))
    assert dps.l in xs or dps.first is None
    assert dbs.l <= inst.xs.max() <= dbs.r or dbs.committed
