"""Agent policies.

All agents see the full current realization and the announced set.  They
return a proposal: ``None`` (null) or an index into the realization.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import kernels
from .core import (
    EligibleSet,
    InvalidParameter,
    Proposal,
    Realization,
    RoundRecord,
    SetKind,
    round_outcome,
)

DEFAULT_NODE_LIMIT = 10 ** 7
MAX_ORACLE_HORIZON = 12


class BudgetExceeded(RuntimeError):
    """The lookahead search visited more nodes than its limit allows."""


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    knows_mechanism: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParameter(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def T_gamma(self) -> float:
        return 1.0 / (1.0 - self.gamma)


@dataclass
class AgentObservation:
    realization: Realization
    eligible: EligibleSet
    round: int
    # transcript so far; agents read (round, set, accepted) from it
    history: Sequence[RoundRecord] = ()
    mechanism: Optional[dict] = None

    @property
    def announced_history(self) -> list[tuple[int, EligibleSet, bool]]:
        return [(r.round, r.eligible, r.accepted) for r in self.history]


def _code(eligible: EligibleSet):
    if eligible.kind == SetKind.EXPLICIT:
        return None
    return int(eligible.kind), eligible.tau


def _proposal(idx: int) -> Proposal:
    return None if idx < 0 else int(idx)


# ---------------------------------------------------------------------------
# one-shot responses


def best_response(realization: Realization, eligible: EligibleSet) -> Proposal:
    """Maximise eventual agent utility; ties go to higher principal utility.

    Null is worth (0, 0); an ineligible proposal is never preferred to null.
    """
    code = _code(eligible)
    if code is not None:
        return _proposal(kernels.best_response(realization.xs, realization.ys, code[0], code[1]))
    best, by, bx = None, 0.0, 0.0
    for i, (x, y) in enumerate(zip(realization.xs.tolist(), realization.ys.tolist())):
        if eligible.contains_xy(x, y) and (y > by or (y == by and x > bx)):
            best, by, bx = i, y, x
    return best


def eps_best_response_set(realization: Realization, eligible: EligibleSet, eps: float) -> frozenset:
    """Proposals (eligible solutions or null) within ``eps`` of the best eventual utility."""
    if eps < 0:
        raise InvalidParameter("eps must be non-negative")
    pts = list(zip(realization.xs.tolist(), realization.ys.tolist()))
    ok = [i for i, (x, y) in enumerate(pts) if eligible.contains_xy(x, y)]
    m = max([0.0] + [pts[i][1] for i in ok])
    floor = m - eps
    out = {i for i in ok if pts[i][1] >= floor}
    if 0.0 >= floor:
        out.add(None)
    return frozenset(out)


def adversarial_response(realization: Realization, eligible: EligibleSet, eps: float) -> Proposal:
    """The eps-best response worst for the principal.

    Order: lowest principal utility (null = 0), then lowest agent utility,
    then null before solutions, then lowest index.
    """
    code = _code(eligible)
    if code is not None:
        return _proposal(kernels.adversarial_response(realization.xs, realization.ys, code[0], code[1], eps))
    cands = eps_best_response_set(realization, eligible, eps)
    xs, ys = realization.xs, realization.ys

    def rank(p):
        if p is None:
            return (0.0, 0.0, -1)
        return (float(xs[p]), float(ys[p]), p)

    return min(cands, key=rank)


def adversarial_eps_agent(obs: AgentObservation, eps: float) -> Proposal:
    return adversarial_response(obs.realization, obs.eligible, eps)


def should_reveal(j: int, K_budget: int, gamma: float, y: float) -> bool:
    """Whether revealing a solution worth ``y`` per round beats hiding it for K_budget more rounds.

    The comparison gamma^j y/(1-gamma) >= gamma^(j+K_budget) does not depend on j.
    """
    if not 0.0 < gamma < 1.0 or y < 0 or K_budget < 0:
        raise InvalidParameter("need gamma in (0,1), y >= 0, K_budget >= 0")
    return y / (1.0 - gamma) >= gamma ** K_budget


# ---------------------------------------------------------------------------
# stateful agents used by the engine


class Agent:
    """Base agent.  ``memoryless`` agents map (realization, set) to a proposal
    independently of the round and past rounds."""

    name = "agent"
    memoryless = True
    kernel_code: Optional[int] = None  # fused-kernel agent code, if any
    kernel_eps = 0.0

    def act(self, obs: AgentObservation) -> Proposal:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name, "params": {}}


class MyopicAgent(Agent):
    name = "myopic"
    kernel_code = kernels.MYOPIC

    def act(self, obs):
        return best_response(obs.realization, obs.eligible)


class AdversarialAgent(Agent):
    name = "adversarial"
    kernel_code = kernels.ADVERSARIAL

    def __init__(self, eps: float):
        if eps < 0:
            raise InvalidParameter("eps must be non-negative")
        self.eps = float(eps)
        self.kernel_eps = self.eps

    def act(self, obs):
        return adversarial_response(obs.realization, obs.eligible, self.eps)

    def describe(self):
        return {"name": self.name, "params": {"eps": self.eps}}


class HidingAgent(Agent):
    """Scripted lower-bound agent that pretends to hold only its favourite solution.

    ``variant="P1"``: hides the rest unless :func:`should_reveal` holds for
    the best hidden solution, in which case it best-responds from then on.
    ``variant="nondiscounting"``: never reveals.
    The favourite is the solution with the highest agent utility (ties: lower
    principal utility, then lower index).
    """

    name = "hiding"
    VARIANTS = ("P1", "nondiscounting")

    def __init__(self, variant: str = "P1", gamma: float = 0.9, K_budget: int = 280):
        if variant not in self.VARIANTS:
            raise InvalidParameter(f"unknown hiding variant {variant!r}; expected one of {self.VARIANTS}")
        self.variant = variant
        self.gamma = float(gamma)
        self.K_budget = int(K_budget)
        self.revealed = False

    @staticmethod
    def favourite(realization: Realization) -> Optional[int]:
        if len(realization) == 0:
            return None
        pts = list(zip(realization.ys.tolist(), realization.xs.tolist()))
        return min(range(len(pts)), key=lambda i: (-pts[i][0], pts[i][1], i))

    def act(self, obs):
        real = obs.realization
        fav = self.favourite(real)
        if fav is None:
            return None
        if self.variant == "P1" and not self.revealed:
            hidden = [y for i, y in enumerate(real.ys.tolist()) if i != fav]
            if hidden and should_reveal(obs.round, self.K_budget, self.gamma, max(hidden)):
                self.revealed = True
        if self.revealed:
            return best_response(real, obs.eligible)
        x, y = float(real.xs[fav]), float(real.ys[fav])
        return fav if obs.eligible.contains_xy(x, y) else None

    def describe(self):
        return {"name": self.name, "params": {"variant": self.variant, "gamma": self.gamma,
                                                "K_budget": self.K_budget}}


def hiding_agent_step(obs: AgentObservation, fixture: str, state: Optional[HidingAgent] = None,
                      gamma: float = 0.9, K_budget: int = 280) -> Proposal:
    """One step of the scripted hiding agent; ``state`` carries the reveal flag between calls."""
    if state is None:
        state = HidingAgent(fixture, gamma, K_budget)
    elif state.variant != fixture:
        raise InvalidParameter("state belongs to a different fixture")
    return state.act(obs)


class ScriptedAgent(Agent):
    """Plays a fixed proposal sequence (e.g. an oracle policy), then best-responds."""

    name = "scripted"
    memoryless = False

    def __init__(self, actions: Sequence[Proposal]):
        self.actions = list(actions)

    def act(self, obs):
        if obs.round <= len(self.actions):
            p = self.actions[obs.round - 1]
            if p is not None and not 0 <= p < len(obs.realization):
                return None
            return p
        return best_response(obs.realization, obs.eligible)


AGENTS = {
    "myopic": MyopicAgent,
    "adversarial": AdversarialAgent,
    "hiding": HidingAgent,
}


def build_agent(name: str, params: Optional[dict] = None, gamma: float = 0.9) -> Agent:
    params = dict(params or {})
    if name not in AGENTS:
        raise InvalidParameter(f"unknown agent {name!r}; known: {sorted(AGENTS)}")
    if name == "hiding":
        params.setdefault("gamma", gamma)
    try:
        return AGENTS[name](**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for agent {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# exhaustive lookahead over a deterministic instance


@dataclass
class OracleResult:
    value: float
    actions: list
    nodes: int
    sets: list = field(default_factory=list)  # sets announced along the optimal path


def _pending(records, consumed):
    return tuple((r.accepted, r.principal_utility, r.agent_utility_raw) for r in records[consumed:])


def _fresh(mechanism):
    if isinstance(mechanism, type) or (callable(mechanism) and not hasattr(mechanism, "announce")):
        return mechanism()
    return copy.deepcopy(mechanism)


def lookahead_oracle(instance, mechanism, horizon: int, gamma: float, eps: Optional[float] = None,
                     node_limit: int = DEFAULT_NODE_LIMIT) -> OracleResult:
    """Optimal discounted agent utility against a deterministic mechanism.

    Backward induction over (round, mechanism state, unread feedback) with
    K+1 actions per round.  ``eps`` restricts every round's action to the
    eps-best-response set.  ``mechanism`` is a mechanism instance (copied) or
    a zero-argument factory.
    """
    if not instance.is_deterministic:
        raise InvalidParameter("lookahead oracle needs a deterministic instance")
    if not 1 <= horizon <= MAX_ORACLE_HORIZON:
        raise InvalidParameter(f"horizon must lie in [1, {MAX_ORACLE_HORIZON}]")
    if not 0.0 < gamma <= 1.0:
        raise InvalidParameter("gamma must lie in (0, 1]")
    K = instance.K
    memo: dict = {}
    nodes = 0
    real = instance.realization(1)

    def solve(t, mech, records):
        nonlocal nodes
        if t > horizon:
            return 0.0, (), ()
        key = (t, mech.state_key(), _pending(records, mech.consumed))
        hit = memo.get(key)
        if hit is not None:
            return hit
        nodes += 1
        if nodes > node_limit:
            raise BudgetExceeded(f"lookahead exceeded {node_limit} nodes")
        m = copy.deepcopy(mech)
        E = m.announce(t, records)
        if eps is None:
            actions = [None] + list(range(K))
        else:
            actions = sorted(eps_best_response_set(Realization(t, real.xs, real.ys), E, eps),
                             key=lambda p: -1 if p is None else p)
        disc = gamma ** (t - 1)
        best = None
        for a in actions:
            acc, x, y = round_outcome(E, real, a)
            px = math.nan if a is None else float(real.xs[a])
            py = math.nan if a is None else float(real.ys[a])
            rec = RoundRecord(t, E, a, acc, x, y, disc * y, px, py)
            v, tail, sets = solve(t + 1, m, records + (rec,))
            v += disc * y
            if best is None or v > best[0]:
                best = (v, (a,) + tail, (E,) + sets)
        memo[key] = best
        return best

    value, acts, sets = solve(1, _fresh(mechanism), ())
    return OracleResult(value, list(acts), nodes, list(sets))


def policy_value(instance, mechanism, agent: Agent, horizon: int, gamma: float) -> float:
    """Discounted agent utility of ``agent`` against a fresh copy of ``mechanism``."""
    mech = _fresh(mechanism)
    agent = copy.deepcopy(agent)
    records: list = []
    total = 0.0
    for t in range(1, horizon + 1):
        E = mech.announce(t, records)
        real = instance.realization(t)
        p = agent.act(AgentObservation(real, E, t, records, mech.describe()))
        acc, x, y = round_outcome(E, real, p)
        disc = gamma ** (t - 1)
        total += disc * y
        px = math.nan if p is None else float(real.xs[p])
        py = math.nan if p is None else float(real.ys[p])
        records.append(RoundRecord(t, E, p, acc, x, y, disc * y, px, py))
    return total


def lookahead_oracle_agent(instance, mechanism, horizon: int, gamma: float,
                           node_limit: int = DEFAULT_NODE_LIMIT) -> tuple[ScriptedAgent, float]:
    """Optimal open-loop policy (as an agent) and its discounted value."""
    res = lookahead_oracle(instance, mechanism, horizon, gamma, None, node_limit)
    return ScriptedAgent(res.actions), res.value
