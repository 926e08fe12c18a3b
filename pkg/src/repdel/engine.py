"""Round loop, replication and trace export."""
from __future__ import annotations

import csv
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .agents import AdversarialAgent, Agent, AgentObservation, MyopicAgent, build_agent
from .benchmark import DEFAULT_GRID, DEFAULT_SAMPLES, DEFAULT_SEED, BenchmarkResult, cached_opt, regret_trace
from .core import EligibleSet, History, InvalidParameter, Outcome, Realization, round_outcome
from .instances import InstanceModel, RealizationStream
from .mechanisms import (
    Mechanism,
    StochasticStrategic,
    SuccessiveEliminationDelayed,
    UCBThreshold,
    build_mechanism,
)

ROW_BLOCK = 4096


@dataclass(frozen=True)
class MechanismSpec:
    name: str
    params: dict = field(default_factory=dict)
    delay: int = 0  # wrap in a delay view when > 0


@dataclass(frozen=True)
class AgentSpec:
    name: str = "myopic"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BenchmarkSpec:
    grid_size: int = DEFAULT_GRID
    n_samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    estimator: str = "auto"


@dataclass(frozen=True)
class SimulationConfig:
    """One run.  ``mechanism`` and ``agent`` are specs or zero-argument factories."""

    instance: InstanceModel
    mechanism: Union[MechanismSpec, Callable[[], Mechanism]]
    agent: Union[AgentSpec, Callable[[], Agent]] = AgentSpec()
    T: int = 1000
    seed: int = 0
    gamma: float = 0.9
    knows_mechanism: bool = True
    benchmark: BenchmarkSpec = BenchmarkSpec()

    def __post_init__(self):
        if self.T < 1:
            raise InvalidParameter("T must be at least 1")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParameter("gamma must lie in (0, 1)")

    def with_seed(self, seed: int) -> "SimulationConfig":
        return SimulationConfig(self.instance, self.mechanism, self.agent, self.T, seed, self.gamma,
                                self.knows_mechanism, self.benchmark)

    def build_mechanism(self) -> Mechanism:
        m = self.mechanism
        if isinstance(m, MechanismSpec):
            return build_mechanism(m.name, m.params, T=self.T, gamma=self.gamma, instance=self.instance,
                                   delay=m.delay)
        return m()

    def build_agent(self) -> Agent:
        a = self.agent
        if isinstance(a, AgentSpec):
            return build_agent(a.name, a.params, gamma=self.gamma)
        return a()


@dataclass
class RunResult:
    history: History
    regret_trace: np.ndarray
    agent_discounted_total: float
    benchmark: BenchmarkResult
    mechanism_summary: dict
    fast_path: bool = False

    @property
    def T(self) -> int:
        return len(self.history)

    @property
    def regret(self) -> float:
        return float(self.regret_trace[-1]) if len(self.regret_trace) else 0.0

    @property
    def principal_total(self) -> float:
        return float(self.history.principal_utilities.sum())


def split_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for (realizations, mechanism, agent) from one root seed."""
    kids = np.random.SeedSequence(int(seed)).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(k)) for k in kids)


def get_benchmark(config: SimulationConfig) -> BenchmarkResult:
    b = config.benchmark
    return cached_opt(config.instance, b.grid_size, b.n_samples, b.seed, b.estimator)


def _kernel_plan(mech: Mechanism, agent: Agent, instance: InstanceModel):
    """Fused-kernel arguments when the run can skip the per-round loop."""
    if type(agent) not in (MyopicAgent, AdversarialAgent) or instance.K == 0:
        return None
    if type(mech) is UCBThreshold and mech.consumed == 0 and not mech.arms:
        return ("ucb", mech.Q)
    if type(mech) in (SuccessiveEliminationDelayed, StochasticStrategic) and mech.consumed == 0 and not mech.arms:
        return ("se", mech.Q, mech.D, mech.delta, mech.T)
    return None


def _run_fused(plan, agent: Agent, stream: RealizationStream, T: int, history: History) -> dict:
    X, Y = stream.take(T)
    code, eps = agent.kernel_code, agent.kernel_eps
    Q = plan[1]
    if plan[0] == "ucb":
        arms, props, pu, au = kernels.run_ucb(X, Y, Q, code, eps)
        summary = {"Q": Q, "pulls": np.bincount(arms, minlength=Q).tolist()}
    else:
        _, _, D, delta, horizon = plan
        arms, props, pu, au, elim = kernels.run_se(X, Y, Q, D, delta, horizon, code, eps)
        summary = {"Q": Q, "D": D, "delta": delta,
                   "active": [i for i in range(Q) if elim[i] == 0],
                   "eliminated": elim.tolist(), "pulls": np.bincount(arms, minlength=Q).tolist()}
    sets = [EligibleSet.inclusive((i + 1) / Q) for i in range(Q)]
    has = props >= 0
    safe = np.where(has, props, 0)
    rows = np.arange(T)
    px = np.where(has, X[rows, safe], np.nan)
    py = np.where(has, Y[rows, safe], np.nan)
    history.extend_arrays(arms, sets, props, has, pu, au, px, py)
    return summary


def run_simulation(config: SimulationConfig, benchmark: Optional[BenchmarkResult] = None,
                   fast: bool = True) -> RunResult:
    """Play ``config.T`` rounds.

    Each round: the mechanism announces a set from the transcript so far,
    the agent sees the round's realization and answers, the outcome is
    recorded.  Identical configs give identical results.  ``fast`` enables
    the fused bandit kernels and the bulk fill once a mechanism has
    committed on a deterministic instance; both produce the same history as
    the plain loop.
    """
    inst = config.instance
    T = config.T
    mech = config.build_mechanism()
    agent = config.build_agent()
    rng_real, _rng_mech, _rng_agent = split_streams(config.seed)
    stream = RealizationStream(inst, rng_real)
    bench = benchmark if benchmark is not None else get_benchmark(config)
    history = History(capacity=min(T, 1 << 16), gamma=config.gamma)
    desc = mech.describe() if config.knows_mechanism else None

    plan = _kernel_plan(mech, agent, inst) if fast else None
    if plan is not None:
        summary = _run_fused(plan, agent, stream, T, history)
        if isinstance(mech, StochasticStrategic):
            summary["eps"] = mech.eps
    else:
        X = Y = None
        pos = 0
        t = 1
        while t <= T:
            if fast and mech.committed and inst.is_deterministic and agent.memoryless:
                E = mech.final_set
                real = inst.realization(t)
                p = agent.act(AgentObservation(real, E, t, history, desc))
                out = round_outcome(E, real, p)
                px = math.nan if p is None else float(real.xs[p])
                py = math.nan if p is None else float(real.ys[p])
                history.fill(T - t + 1, E, p, out, px, py)
                break
            if X is None or pos == len(X):
                X, Y = stream.take(min(ROW_BLOCK, T - t + 1))
                pos = 0
            E = mech.announce(t, history)
            real = Realization(t, X[pos], Y[pos])
            pos += 1
            p = agent.act(AgentObservation(real, E, t, history, desc))
            out = round_outcome(E, real, p)
            px = math.nan if p is None else float(real.xs[p])
            py = math.nan if p is None else float(real.ys[p])
            history.append(E, p, out, px, py)
            t += 1
        summary = mech.summary()

    trace = regret_trace(history.principal_utilities, bench.opt_per_round)
    agent_total = float(history.discounted_agent_utilities().sum())
    return RunResult(history, trace, agent_total, bench, summary, plan is not None)


# ---------------------------------------------------------------------------
# replication


@dataclass
class ReplicateResult:
    seeds: list
    regrets: np.ndarray
    mean_trace: Optional[np.ndarray]
    std_trace: Optional[np.ndarray]
    summaries: list

    @property
    def mean_regret(self) -> float:
        return float(np.mean(self.regrets))

    @property
    def std_regret(self) -> float:
        return float(np.std(self.regrets, ddof=1)) if len(self.regrets) > 1 else 0.0


def _one(args):
    config, seed, bench, keep = args
    res = run_simulation(config.with_seed(seed), bench)
    out = {
        "seed": seed,
        "regret": res.regret,
        "principal_total": res.principal_total,
        "agent_discounted_total": res.agent_discounted_total,
        "mechanism": res.mechanism_summary,
    }
    return out, (res.regret_trace if keep else None)


def replicate(config: SimulationConfig, seeds: Sequence[int], parallelism: int = 1,
              keep_traces: bool = True) -> ReplicateResult:
    """Independent runs over ``seeds``; statistics are reduced in seed order."""
    seeds = list(seeds)
    if not seeds:
        raise InvalidParameter("need at least one seed")
    bench = get_benchmark(config)
    jobs = [(config, s, bench, keep_traces) for s in seeds]
    if parallelism > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as ex:
            results = list(ex.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]
    summaries = [r[0] for r in results]
    regrets = np.array([s["regret"] for s in summaries])
    mean_trace = std_trace = None
    if keep_traces:
        traces = np.vstack([r[1] for r in results])
        mean_trace = traces.mean(axis=0)
        std_trace = traces.std(axis=0, ddof=1) if len(seeds) > 1 else np.zeros(traces.shape[1])
    return ReplicateResult(seeds, regrets, mean_trace, std_trace, summaries)


# ---------------------------------------------------------------------------
# export

TRACE_COLUMNS = ["t", "tau_or_set_kind", "proposal_x", "proposal_y", "accepted", "principal_utility", "cum_regret"]


def _fmt(v: float) -> str:
    return "" if v != v else repr(float(v))


def write_trace_csv(result: RunResult, path) -> None:
    """Per-round trace; written to a temporary file and renamed into place."""
    h = result.history
    labels = [s.label for s in h.sets]
    px, py = h.proposal_xy
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            w.writerows(
                (t + 1, labels[s], _fmt(x), _fmt(y), int(a), repr(u), repr(r))
                for t, (s, x, y, a, u, r) in enumerate(zip(h.set_ids.tolist(), px.tolist(), py.tolist(),
                                                           h.accepted.tolist(), h.principal_utilities.tolist(),
                                                           result.regret_trace.tolist()))
            )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
