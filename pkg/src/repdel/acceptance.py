"""Acceptance checks, shared by ``repdel verify`` and the test suite.

Each check returns a :class:`CriterionResult` with the measured and
expected values so failures can be read off directly.
"""
from __future__ import annotations

import copy
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import (
    AdversarialAgent,
    HidingAgent,
    MyopicAgent,
    lookahead_oracle,
    policy_value,
    should_reveal,
)
from .benchmark import f_tau_stats
from .core import Outcome
from .engine import AgentSpec, MechanismSpec, SimulationConfig, replicate, run_simulation
from .instances import (
    InstanceModel,
    appendix_k,
    generate_deterministic_chain,
    p1,
    p2,
    random_deterministic,
    two_uniform_complement,
    two_uniform_complement_truncated,
)
from .mechanisms import (
    DelayedBinarySearch,
    DelayedIterativeSearch,
    DelayedProgressiveSearch,
    DelayWrapper,
    IterativeSearch,
    StochasticStrategic,
    SuccessiveEliminationDelayed,
    UCBThreshold,
    delay_rounds,
    mechanism_names,
    num_arms,
)
from .rppm import KLAdapter, KLPricer, RppmEnvironment, run_rppm

ACCOUNTING_TOL = 1e-9


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: str
    expected: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.title}: measured {self.measured}; expected {self.expected} ({self.seconds:.1f}s)"


def _sqrt_tlogt(T):
    return math.sqrt(T * math.log(T))


# ---------------------------------------------------------------------------


def criterion_1():
    """Iterative search regret <= K + 1 against a myopic agent."""
    rng = np.random.default_rng(101)
    worst = -math.inf
    bad = []
    for K in range(1, 51):
        inst = random_deterministic(K, rng)
        r = run_simulation(SimulationConfig(inst, MechanismSpec("iterative_search"), T=10_000))
        margin = r.regret - (K + 1)
        worst = max(worst, margin)
        if margin > ACCOUNTING_TOL:
            bad.append(K)
    return CriterionResult(1, "iterative search regret <= K+1", not bad,
                           f"max(regret - (K+1)) = {worst:.3g} over K=1..50, violations {bad}",
                           "<= 0 for all 50 instances")


def _instance_with_max(v, rng, K=5):
    xs = rng.random(K) * v
    xs[rng.integers(K)] = v
    ys = 1.0 - rng.random(K)
    return InstanceModel.deterministic(zip(xs.tolist(), ys.tolist()), f"max{v}")


def criterion_2():
    """Posted-price adapter regret grows like log log T."""
    rng = np.random.default_rng(202)
    rows = []
    ok = True
    for v in (0.2, 0.5, 0.73, 0.95):
        inst = _instance_with_max(v, rng)
        ratios = []
        for e in (10, 16, 22):
            T = 2 ** e
            r = run_simulation(SimulationConfig(inst, MechanismSpec("kl_adapter"), T=T))
            ratios.append(r.regret / math.log2(math.log2(T)))
        spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
        ok &= spread <= 2.0
        rows.append(f"v={v}: {spread:.3f}")
    return CriterionResult(2, "posted-price adapter regret / log2 log2 T", ok,
                           "max/min ratio " + ", ".join(rows), "<= 2 for every v")


def criterion_3():
    """Adapter accepts exactly when the pricer sells, and earns at least the price."""
    rng = np.random.default_rng(303)
    T = 4096
    mismatches = 0
    below = 0
    for _ in range(20):
        inst = random_deterministic(int(rng.integers(1, 11)), rng)
        v = float(inst.xs.max())
        r = run_simulation(SimulationConfig(inst, MechanismSpec("kl_adapter"), T=T))
        pr = run_rppm(KLPricer(T), RppmEnvironment(v, T))
        mismatches += int(np.sum(r.history.accepted != pr.sold))
        below += int(np.sum(r.history.principal_utilities < pr.revenue))
    return CriterionResult(3, "posted-price reduction coupling", mismatches == 0 and below == 0,
                           f"{mismatches} acceptance mismatches, {below} rounds with utility < revenue",
                           "0 and 0 over 20 instances")


def _chains(K_values, d, L1, L2, y_min, seed0):
    return [generate_deterministic_chain(K, d, L1, L2, y_min, seed=seed0 + K) for K in K_values]


def criterion_4():
    """Delayed iterative search regret bound, plus the lookahead envelope check."""
    gamma, y_min = 0.9, 0.05
    eps = y_min / 2
    D = delay_rounds(gamma, y_min)
    worst = -math.inf
    ok = True
    for inst in _chains(range(1, 11), 0.05, 0.9, 1.1, y_min, 400):
        K = inst.K
        r = run_simulation(SimulationConfig(inst, MechanismSpec("delayed_iterative_search", {"y_min": y_min}),
                                            AgentSpec("adversarial", {"eps": eps}), T=10_000, gamma=gamma))
        bound = 2 * (K + 1) * (D + 1)
        worst = max(worst, r.regret / bound)
        ok &= r.regret <= bound
    # small-scale oracle: strong discounting so a short delay already binds
    g2, ymin2 = 0.2, 0.5
    eps2 = ymin2 / 2
    D2 = delay_rounds(g2, eps2)
    H = 10
    slack = eps2 * sum(g2 ** (t - 1) for t in range(1, H + 1))
    gap = -math.inf
    for inst in _chains((1, 2, 3), 0.1, 0.9, 1.1, ymin2, 440):
        factory = lambda: DelayedIterativeSearch(g2, ymin2, D=D2)
        v_opt = lookahead_oracle(inst, factory, H, g2).value
        v_env = lookahead_oracle(inst, factory, H, g2, eps=eps2).value
        gap = max(gap, v_opt - v_env)
        ok &= v_opt <= v_env + slack + 1e-12
    return CriterionResult(4, "delayed iterative search vs eps-agent", ok,
                           f"max regret/bound = {worst:.3f} (D={D}); oracle excess over eps-envelope = {gap:.3g}",
                           f"regret/bound <= 1; excess <= {slack:.4f} (D={D2}, horizon {H})")


def criterion_5():
    gamma, y_min = 0.9, 0.05
    eps = y_min / 2
    T = 100_000
    D = delay_rounds(gamma, y_min)
    bound = 4 * (D + math.log2(T)) + 1
    ok = True
    worst_reg = -math.inf
    worst_l = -math.inf
    for inst in _chains(range(1, 11), 0.05, 0.9, 1.1, y_min, 500):
        r = run_simulation(SimulationConfig(inst, MechanismSpec("delayed_binary_search", {"y_min": y_min}),
                                            AgentSpec("adversarial", {"eps": eps}), T=T, gamma=gamma))
        l = r.mechanism_summary["l"]
        mx = float(inst.xs.max())
        ok &= (mx - 1.0 / T <= l <= mx) and r.regret <= bound
        worst_reg = max(worst_reg, r.regret)
        worst_l = max(worst_l, mx - l)
    return CriterionResult(5, "delayed binary search", ok,
                           f"max(maxX - l) = {worst_l:.3g}, max regret = {worst_reg:.2f}",
                           f"maxX - l in [0, {1.0 / T}], regret <= {bound:.2f}")


def criterion_6():
    gamma, L1, L2, y_min = 0.9, 1.0, 1.2, 0.05
    T = 100_000
    ok = True
    rows = []
    for d, K in ((0.01, 20), (0.005, 40)):
        for s in range(5):
            inst = generate_deterministic_chain(K, d, L1, L2, y_min, seed=600 + s)
            mech = DelayedProgressiveSearch(gamma, L1, L2, d)
            r = run_simulation(SimulationConfig(
                inst, MechanismSpec("delayed_progressive_search", {"L1": L1, "L2": L2, "d": d}),
                AgentSpec("adversarial", {"eps": mech.eps}), T=T, gamma=gamma))
            bound = 8 * (mech.D + math.log(1 / (4 * d)) + 4 * d * T)
            short = float(inst.xs.max()) - r.mechanism_summary["l"]
            ok &= short <= 4 * d + 1e-12 and r.regret <= bound
            rows.append((d, short, r.regret, bound))
    worst = max(rows, key=lambda x: x[2] / x[3])
    return CriterionResult(6, "delayed progressive search", ok,
                           f"max(maxX - l)/(4d) = {max(x[1] / (4 * x[0]) for x in rows):.3f}, "
                           f"worst regret {worst[2]:.1f} vs bound {worst[3]:.1f}",
                           "maxX - l <= 4d and regret <= bound")


def _library(T, gamma):
    """One configured instance of every mechanism, for transcript comparisons."""
    return {
        "iterative_search": lambda: IterativeSearch(),
        "delayed_iterative_search": lambda: DelayedIterativeSearch(gamma, 0.05),
        "delayed_binary_search": lambda: DelayedBinarySearch(gamma, 0.05, T),
        "delayed_progressive_search": lambda: DelayedProgressiveSearch(gamma, 1.0, 1.2, 0.1),
        "ucb_threshold": lambda: UCBThreshold(T),
        "successive_elimination_delayed": lambda: SuccessiveEliminationDelayed(num_arms(T), 20, 0.01, T),
        "stochastic_strategic": lambda: StochasticStrategic(gamma, 1.0, 0.05, T),
        "kl_adapter": lambda: KLAdapter(T),
    }


def criterion_7():
    gamma, y = 0.9, 1e-14
    reveal = [K for K in range(0, 281) if should_reveal(1, K, gamma, y)]
    boundary = next(K for K in range(281, 2000) if should_reveal(1, K, gamma, y))
    T = 3000
    differing = []
    for name, factory in _library(T, gamma).items():
        a = run_simulation(SimulationConfig(p1(0.1, y), factory,
                                            lambda: HidingAgent("P1", gamma, 280), T=T, gamma=gamma))
        b = run_simulation(SimulationConfig(p2(0.1), factory, lambda: MyopicAgent(), T=T, gamma=gamma))
        if a.history.transcript() != b.history.transcript():
            differing.append(name)
    ok = not reveal and not differing
    return CriterionResult(7, "hiding incentive on P1", ok,
                           f"reveal for K_budget<=280: {reveal or 'never'} (first reveal at {boundary}); "
                           f"transcripts differ for {differing or 'no mechanism'}",
                           "never reveal; identical transcripts for all 8 mechanisms")


def criterion_8():
    gamma, H = 0.999, 10
    inst = appendix_k(0.1)
    gated = {
        "iterative_search": lambda: IterativeSearch(),
        "delayed_iterative_search": lambda: DelayedIterativeSearch(gamma, 0.1, D=1),
        "delayed_binary_search": lambda: DelayedBinarySearch(gamma, 0.1, H, D=1),
        "delayed_progressive_search": lambda: DelayedProgressiveSearch(gamma, 1.0, 1.2, 0.05, D=1),
        "kl_adapter": lambda: KLAdapter(H),
    }
    ok = True
    rows = []
    for name, f in gated.items():
        pretend = policy_value(inst, f, HidingAgent("nondiscounting", gamma), H, gamma)
        truthful = policy_value(inst, f, MyopicAgent(), H, gamma)
        best = lookahead_oracle(inst, f, H, gamma).value
        ok &= pretend >= truthful and best >= pretend - 1e-12
        rows.append(f"{name} {pretend:.3f}>={truthful:.3f}")
    return CriterionResult(8, "non-discounting pretend policy", ok, "; ".join(rows),
                           "pretend >= truthful and oracle >= pretend for every deterministic-setting mechanism")


def _ucb_ratio(T, seeds=range(20)):
    cfg = SimulationConfig(two_uniform_complement(), MechanismSpec("ucb_threshold"), T=T)
    rr = replicate(cfg, seeds, keep_traces=False)
    return rr.mean_regret / _sqrt_tlogt(T), rr


def criterion_9():
    inst = two_uniform_complement()
    tau_s, f_s = inst.curve_argmax()
    mc, se = f_tau_stats(inst, tau_s, n_samples=1_000_000, seed=9)
    r1, _ = _ucb_ratio(10_000)
    r4, _ = _ucb_ratio(40_000)
    r5, rr = _ucb_ratio(100_000)
    T = 100_000
    avg = float(np.mean([s["principal_total"] for s in rr.summaries])) / T
    spread = max(r1, r4) / min(r1, r4)
    ok = abs(mc - f_s) <= 0.005 and spread <= 1.5 and avg >= f_s - 0.03
    return CriterionResult(9, "UCB thresholds on TwoUniformComplement", ok,
                           f"MC f(tau*)={mc:.5f} vs {f_s:.5f}; ratios {r1:.3f}, {r4:.3f} (spread {spread:.3f}); "
                           f"average utility {avg:.4f}",
                           f"|MC - f*| <= 0.005, spread <= 1.5, average >= {f_s - 0.03:.4f}")


def discretization_errors(Qs=(8, 16, 32, 64)):
    inst = two_uniform_complement()
    _, f_s = inst.curve_argmax()
    return [f_s - float(np.max(inst.curve(np.arange(1, Q + 1) / Q))) for Q in Qs]


def criterion_10():
    errs = discretization_errors()
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    ok = all(3.0 <= r <= 5.0 for r in ratios)
    return CriterionResult(10, "discretization error rate", ok,
                           "errors " + ", ".join(f"{e:.3g}" for e in errs) + "; ratios "
                           + ", ".join(f"{r:.2f}" for r in ratios),
                           "every ratio in [3, 5]")


def criterion_11():
    T, gamma, y_min, L1 = 100_000, 0.9, 0.05, 1.0
    inst = two_uniform_complement_truncated(y_min)
    eps = min(L1 / T, y_min)
    cfg = SimulationConfig(inst, MechanismSpec("stochastic_strategic", {"L1": L1, "y_min": y_min}),
                           AgentSpec("adversarial", {"eps": eps}), T=T, gamma=gamma)
    rr = replicate(cfg, range(20), keep_traces=False)
    Q = num_arms(T)
    best_arm = int(np.argmax(inst.curve(np.arange(1, Q + 1) / Q)))
    kept = np.mean([s["mechanism"]["eliminated"][best_arm] == 0 for s in rr.summaries])
    ratio = rr.mean_regret / _sqrt_tlogt(T)
    ucb, _ = _ucb_ratio(T)
    ok = kept >= 0.99 and ratio <= 3 * ucb
    return CriterionResult(11, "delayed successive elimination vs eps-agent", ok,
                           f"best arm kept in {kept:.0%} of runs; ratio {ratio:.3f} = {ratio / ucb:.2f} x UCB ratio {ucb:.3f}",
                           ">= 99% and <= 3 x UCB ratio")


def criterion_12(mutations: int = 1000, seed: int = 1212):
    """Records inside the delay window never influence the wrapped mechanism."""
    rng = np.random.default_rng(seed)
    gamma = 0.9
    T = 400
    D = 25
    det = generate_deterministic_chain(10, 0.05, 0.9, 1.1, 0.05, seed=12)
    stoch = two_uniform_complement_truncated(0.05)
    lib = _library(T, gamma)
    changed = 0
    tried = 0
    per_mech = max(1, mutations // len(lib))
    for name, factory in lib.items():
        inst = stoch if name in ("ucb_threshold", "successive_elimination_delayed", "stochastic_strategic") else det
        cfg = SimulationConfig(inst, lambda f=factory: DelayWrapper(f(), D),
                               lambda: AdversarialAgent(0.01), T=T, gamma=gamma, seed=7)
        hist = run_simulation(cfg, fast=False).history
        # replay to collect the wrapped state at each test round
        checks = sorted(rng.choice(np.arange(D + 2, T + 1), size=per_mech, replace=True).tolist())
        mech = DelayWrapper(factory(), D)
        t_done = 0
        for t in checks:
            while t_done < t - 1:
                t_done += 1
                mech.announce(t_done, hist.view(t_done - 1))
            base = copy.deepcopy(mech).announce(t, hist.view(t - 1))
            mut = hist.copy()
            lo, hi = max(1, t - D + 1), t - 1
            for rnd in rng.integers(lo, hi + 1, size=int(rng.integers(1, 6))).tolist():
                acc = bool(rng.integers(2))
                x = float(rng.random()) if acc else 0.0
                y = float(rng.random()) if acc else 0.0
                mut.overwrite(rnd - 1, 0 if acc else None, Outcome(acc, x, y), x, y)
            other = copy.deepcopy(mech).announce(t, mut.view(t - 1))
            tried += 1
            changed += int(other != base)
    return CriterionResult(12, "delay metamorphic invariance", changed == 0,
                           f"{changed} of {tried} mutated histories changed the announcement (D={D})",
                           "0 changes")


def fast_suite_specs(out_dir: str) -> list[dict]:
    """Small run specs covering every mechanism with its natural instance and agents."""
    det = {"fixture": "P1(0.1, 1e-14)"}
    chain = {"generator": "chain", "params": {"K": 8, "d": 0.05, "L1": 1.0, "L2": 1.2, "y_min": 0.05}, "seed": 3}
    tu = {"fixture": "TwoUniformComplement"}
    tut = {"fixture": "TwoUniformComplementTruncated(0.05)"}
    adv = {"name": "adversarial", "params": {"eps": 0.01}}
    my = {"name": "myopic"}
    hide = {"name": "hiding", "params": {"variant": "P1", "K_budget": 280}}
    cells = [
        ("iterative_search", {}, chain, my),
        ("iterative_search", {}, det, hide),
        ("delayed_iterative_search", {"y_min": 0.05}, chain, adv),
        ("delayed_binary_search", {"y_min": 0.05}, chain, adv),
        ("delayed_binary_search", {"y_min": 0.05}, det, hide),
        ("delayed_progressive_search", {"L1": 1.0, "L2": 1.2, "d": 0.05}, chain, adv),
        ("kl_adapter", {}, chain, my),
        ("ucb_threshold", {}, tu, my),
        ("successive_elimination_delayed", {"Q": 6, "D": 10, "delta": 0.01}, tut, adv),
        ("stochastic_strategic", {"L1": 1.0, "y_min": 0.05}, tut, adv),
    ]
    specs = []
    for i, (mname, mparams, inst, agent) in enumerate(cells):
        specs.append({
            "name": f"c{i:02d}_{mname}_{agent['name']}",
            "instance": inst,
            "mechanism": {"name": mname, "params": mparams},
            "agent": agent,
            "T": [500, 2000],
            "seeds": [1, 2],
            "output_dir": out_dir,
        })
    return specs


def criterion_13():
    from .cli import run_spec

    with tempfile.TemporaryDirectory() as tmp:
        roots = []
        for k in range(2):
            out = os.path.join(tmp, f"run{k}")
            for spec in fast_suite_specs(out):
                run_spec(spec)
            roots.append(Path(out))
        files = sorted(p.relative_to(roots[0]) for p in roots[0].rglob("*.csv"))
        other = sorted(p.relative_to(roots[1]) for p in roots[1].rglob("*.csv"))
        diff = [str(f) for f in files if (roots[0] / f).read_bytes() != (roots[1] / f).read_bytes()]
        ok = files == other and not diff and len(files) > 0
    return CriterionResult(13, "byte-identical CSV output", ok,
                           f"{len(files)} CSV files, {len(diff)} differ", "all identical")


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
    12: criterion_12, 13: criterion_13,
}
SUITES = {
    "fast": [1, 3, 4, 5, 6, 7, 8, 10, 12, 13],
    "full": list(range(1, 14)),
}


def run_criterion(n: int) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[n]()
    res.seconds = time.perf_counter() - t0
    return res


def run_suite(name: str = "fast", echo=print) -> list[CriterionResult]:
    out = []
    for n in SUITES[name]:
        res = run_criterion(n)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
