"""Principal mechanisms as round-by-round state machines.

``announce(t, visible)`` returns the eligible set for round ``t`` (1-based).
``visible`` is the transcript the mechanism may read, rounds 1..len(visible);
the engine passes everything up to round t-1 and :class:`DelayWrapper`
trims it further.  Each mechanism folds new records into its state once,
through a cursor (``consumed``).

When feedback from a probe round is not visible yet (only possible under a
delay wrapper) the search mechanisms hold their current set.
"""
from __future__ import annotations

import inspect
import math
from typing import Optional, Sequence

import numpy as np

from .core import EligibleSet, InvalidParameter, RoundRecord, record_fields


def t_gamma(gamma: float) -> float:
    if not 0.0 < gamma < 1.0:
        raise InvalidParameter(f"gamma must lie in (0, 1), got {gamma}")
    return 1.0 / (1.0 - gamma)


def delay_rounds(gamma: float, eps: float) -> int:
    """Delay that makes deviating from an eps-best response unprofitable:
    ceil(T_g ln(T_g / eps)) with T_g = 1/(1-gamma), floored at 0."""
    if eps <= 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    tg = t_gamma(gamma)
    return max(0, math.ceil(tg * math.log(tg / eps)))


def num_arms(T: int) -> int:
    """ceil((T / ln T)^(1/4)), the threshold grid size for horizon T."""
    if T < 2:
        raise InvalidParameter("T must be at least 2")
    return max(1, math.ceil((T / math.log(T)) ** 0.25))


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(a) for a in v)
    if isinstance(v, dict):
        return tuple(sorted((k, _freeze(a)) for k, a in v.items()))
    if isinstance(v, np.ndarray):
        return (v.dtype.str, v.tobytes())
    return v


class Mechanism:
    name = "mechanism"

    def __init__(self):
        self.consumed = 0
        self.committed = False
        self.final_set: Optional[EligibleSet] = None

    # subclasses implement _observe and _next
    def _observe(self, round: int, accepted: bool, x: float, y: float) -> None:
        pass

    def _next(self, t: int) -> EligibleSet:
        raise NotImplementedError

    def announce(self, t: int, visible: Sequence[RoundRecord]) -> EligibleSet:
        n = len(visible)
        while self.consumed < n:
            acc, x, y = record_fields(visible, self.consumed)
            self.consumed += 1
            self._observe(self.consumed, acc, x, y)
        return self._next(t)

    def commit(self, eligible: EligibleSet) -> EligibleSet:
        self.committed = True
        self.final_set = eligible
        return eligible

    def state_key(self):
        """Hashable summary of everything except the feedback cursor."""
        return (type(self).__name__,) + tuple(
            (k, _freeze(v)) for k, v in sorted(vars(self).items()) if k != "consumed"
        )

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"name": self.name, "params": self.params()}

    def summary(self) -> dict:
        out = {"committed": self.committed}
        if self.final_set is not None:
            out["final_set"] = self.final_set.label
        return out


# ---------------------------------------------------------------------------
# deterministic searches


class IterativeSearch(Mechanism):
    """Raise the strict threshold to each proposal until no proposal comes; then accept >= tau."""

    name = "iterative_search"

    def __init__(self):
        super().__init__()
        self.tau = 0.0
        self.phase = "probe"
        self.probe_round = 0
        self.fb = None
        self.n_probes = 0

    def _observe(self, round, accepted, x, y):
        if round == self.probe_round:
            self.fb = (accepted, x, y)

    def _resolve(self):
        """Apply probe feedback; returns False while it is not visible."""
        if self.fb is None:
            return False
        acc, x, _ = self.fb
        self.fb = None
        if acc:
            self.tau = x
            self.phase = "probe"
        else:
            self.commit(EligibleSet.inclusive(self.tau))
        return True

    def _probe(self, t):
        self.probe_round = t
        self.n_probes += 1
        return EligibleSet.strict(self.tau)

    def _next(self, t):
        if self.committed:
            return self.final_set
        if self.phase == "await":
            if not self._resolve():
                return EligibleSet.strict(self.tau)
            if self.committed:
                return self.final_set
        self.phase = "await"
        return self._probe(t)

    def summary(self):
        return {**super().summary(), "tau": self.tau, "n_probes": self.n_probes}


class DelayedIterativeSearch(IterativeSearch):
    """Iterative search where each strict probe is followed by D more rounds of the same set."""

    name = "delayed_iterative_search"

    def __init__(self, gamma: float, y_min: float, D: Optional[int] = None):
        if not 0 < y_min <= 1:
            raise InvalidParameter(f"y_min must lie in (0, 1], got {y_min}")
        self.gamma = float(gamma)
        self.y_min = float(y_min)
        self.D = delay_rounds(gamma, y_min) if D is None else int(D)
        if self.D < 0:
            raise InvalidParameter("D must be non-negative")
        super().__init__()
        self.left = 0

    def params(self):
        return {"gamma": self.gamma, "y_min": self.y_min, "D": self.D}

    def _next(self, t):
        if self.committed:
            return self.final_set
        if self.phase == "delay":
            if self.left > 0:
                self.left -= 1
                return EligibleSet.strict(self.tau)
            self.phase = "await"
        if self.phase == "await":
            if not self._resolve():
                return EligibleSet.strict(self.tau)
            if self.committed:
                return self.final_set
        self.phase = "delay"
        self.left = self.D
        return self._probe(t)

    def summary(self):
        return {**super().summary(), "D": self.D}


class DelayedBinarySearch(Mechanism):
    """Bisect [l, r] with strict probes at the midpoint; accept >= l during D-round delays."""

    name = "delayed_binary_search"

    def __init__(self, gamma: float, y_min: float, T: int, D: Optional[int] = None):
        if T < 1:
            raise InvalidParameter("T must be at least 1")
        if not 0 < y_min <= 1:
            raise InvalidParameter(f"y_min must lie in (0, 1], got {y_min}")
        self.gamma = float(gamma)
        self.y_min = float(y_min)
        self.T = int(T)
        self.D = delay_rounds(gamma, y_min) if D is None else int(D)
        if self.D < 0:
            raise InvalidParameter("D must be non-negative")
        super().__init__()
        self.l = 0.0
        self.r = 1.0
        self.tau = 0.0
        self.phase = "probe"
        self.probe_round = 0
        self.fb = None
        self.left = 0
        self.n_probes = 0

    def params(self):
        return {"gamma": self.gamma, "y_min": self.y_min, "T": self.T, "D": self.D}

    def _observe(self, round, accepted, x, y):
        if round == self.probe_round:
            self.fb = (accepted, x, y)

    def _next(self, t):
        while True:
            if self.committed:
                return self.final_set
            if self.phase == "probe":
                if self.r - self.l > 1.0 / self.T:
                    self.tau = (self.l + self.r) / 2.0
                    self.probe_round = t
                    self.n_probes += 1
                    self.phase = "await"
                    return EligibleSet.strict(self.tau)
                return self.commit(EligibleSet.inclusive(self.l))
            if self.phase == "await":
                if self.fb is None:
                    return EligibleSet.inclusive(self.l)
                if self.fb[0]:
                    self.l = self.tau
                else:
                    self.r = self.tau
                self.fb = None
                self.phase = "delay"
                self.left = self.D
            if self.phase == "delay":
                if self.left > 0:
                    self.left -= 1
                    return EligibleSet.inclusive(self.l)
                self.phase = "probe"

    def summary(self):
        return {**super().summary(), "l": self.l, "r": self.r, "D": self.D, "n_probes": self.n_probes}


class DelayedProgressiveSearch(Mechanism):
    """Interval search that needs no y_min, using d-density and (L1, L2)-Lipschitz structure.

    After the first proposal a0 the interval is [X_a0, X_a0 + Y_a0 / L1];
    strict midpoint probes move l to the proposed solution.  ``schedule``:
    ``"fixed"`` uses eps = alpha*beta*d with one D (plus an initial D-round
    accept-all block); ``"adaptive"`` uses eps = alpha*(r - l) per probe.
    """

    name = "delayed_progressive_search"

    def __init__(self, gamma: float, L1: float, L2: float, d: float, beta: float = 4.0,
                 schedule: str = "fixed", D: Optional[int] = None):
        if beta < 2:
            raise InvalidParameter("beta must be at least 2")
        if d <= 0:
            raise InvalidParameter("d must be positive")
        if not 0 < L1 <= L2:
            raise InvalidParameter("need 0 < L1 <= L2")
        if schedule not in ("fixed", "adaptive"):
            raise InvalidParameter(f"schedule must be fixed or adaptive, got {schedule!r}")
        self.alpha = L1 - (beta + 2.0) / (2.0 * beta) * L2
        if self.alpha <= 0:
            raise InvalidParameter(f"alpha = L1 - (beta+2)/(2 beta) L2 = {self.alpha} must be positive")
        t_gamma(gamma)
        self.gamma = float(gamma)
        self.L1, self.L2, self.d, self.beta = float(L1), float(L2), float(d), float(beta)
        self.schedule = schedule
        self.D_override = D
        super().__init__()
        self.eps = self.alpha * self.beta * self.d
        self.D = int(D) if D is not None else delay_rounds(gamma, self.eps)
        self.l = 0.0
        self.r = 1.0
        self.y = 0.0
        self.tau = 0.0
        self.first = None
        self.phase = "init"
        self.probe_round = 0
        self.fb = None
        self.left = 0
        self.n_probes = 0
        self.delays: list = []

    def params(self):
        return {"gamma": self.gamma, "L1": self.L1, "L2": self.L2, "d": self.d, "beta": self.beta,
                "schedule": self.schedule, "D": self.D_override}

    def _observe(self, round, accepted, x, y):
        if self.phase == "init":
            if accepted and self.first is None:
                self.first = (x, y)
        elif round == self.probe_round:
            self.fb = (accepted, x, y)

    def _next(self, t):
        while True:
            if self.committed:
                return self.final_set
            if self.phase == "init":
                if self.first is None:
                    return EligibleSet.accept_all()
                self.l, self.y = self.first
                self.r = min(1.0, self.l + self.y / self.L1)
                self.phase = "warm"
                self.left = self.D if self.schedule == "fixed" else 0
            if self.phase == "warm":
                if self.left > 0:
                    self.left -= 1
                    return EligibleSet.accept_all()
                self.phase = "probe"
            if self.phase == "probe":
                if self.r - self.l > self.beta * self.d:
                    self.tau = (self.l + self.r) / 2.0
                    if self.schedule == "adaptive":
                        self.eps = self.alpha * (self.r - self.l)
                        self.D = int(self.D_override) if self.D_override is not None else delay_rounds(self.gamma, self.eps)
                    self.delays.append(self.D)
                    self.probe_round = t
                    self.n_probes += 1
                    self.phase = "await"
                    return EligibleSet.strict(self.tau)
                return self.commit(EligibleSet.inclusive(self.l))
            if self.phase == "await":
                if self.fb is None:
                    return EligibleSet.inclusive(self.l)
                acc, x, y = self.fb
                self.fb = None
                if acc:
                    self.l, self.y = x, y
                else:
                    self.r = self.tau
                self.phase = "delay"
                self.left = self.D
            if self.phase == "delay":
                if self.left > 0:
                    self.left -= 1
                    return EligibleSet.inclusive(self.l)
                self.r = min(self.r, self.l + self.y / self.L1)
                self.phase = "probe"

    def summary(self):
        return {**super().summary(), "l": self.l, "r": self.r, "alpha": self.alpha, "eps": self.eps,
                "D": self.D, "n_probes": self.n_probes}


# ---------------------------------------------------------------------------
# bandits over thresholds {1/Q, ..., Q/Q}


class UCBThreshold(Mechanism):
    """UCB1 over inclusive thresholds i/Q; reward is the round's principal utility."""

    name = "ucb_threshold"

    def __init__(self, T: int, Q: Optional[int] = None):
        self.T = int(T)
        self.Q = num_arms(T) if Q is None else int(Q)
        if self.Q < 1:
            raise InvalidParameter("Q must be at least 1")
        super().__init__()
        self.counts = [0] * self.Q
        self.sums = [0.0] * self.Q
        self.arms: list = []  # arm pulled in each announced round

    @property
    def taus(self):
        return [(i + 1) / self.Q for i in range(self.Q)]

    def params(self):
        return {"T": self.T, "Q": self.Q}

    def _observe(self, round, accepted, x, y):
        arm = self.arms[round - 1]
        self.counts[arm] += 1
        self.sums[arm] += x

    def _choose(self, t):
        if t <= self.Q:
            return t - 1
        counts = self.counts
        for i in range(self.Q):
            if counts[i] == 0:  # only under delayed feedback
                return i
        lt = math.log(t)
        arm = 0
        bidx = -math.inf
        for i in range(self.Q):
            n = counts[i]
            idx = self.sums[i] / n + math.sqrt(2.0 * lt / n)
            if idx > bidx:
                bidx = idx
                arm = i
        return arm

    def _next(self, t):
        arm = self._choose(t)
        self.arms.append(arm)
        return EligibleSet.inclusive((arm + 1) / self.Q)

    def pulls(self):
        return np.bincount(np.asarray(self.arms, dtype=np.int64), minlength=self.Q)

    def summary(self):
        return {"Q": self.Q, "pulls": self.pulls().tolist()}


def confidence_bounds(mean: float, n: int, T: int, delta: float) -> tuple[float, float]:
    """(mean - w - delta, mean + w + delta) with w = sqrt(2 ln T / n)."""
    w = math.sqrt(2.0 * math.log(T) / n)
    return mean - w - delta, mean + w + delta


class SuccessiveEliminationDelayed(Mechanism):
    """Round-robin over active thresholds; drop arms whose UCB falls below another's LCB.

    Statistics at the start of each sweep use rounds <= t - D only, and the
    confidence intervals are widened by ``delta`` on both sides.
    """

    name = "successive_elimination_delayed"

    def __init__(self, Q: int, D: int, delta: float, T: int):
        if Q < 1:
            raise InvalidParameter("Q must be at least 1")
        if D < 0 or delta < 0 or T < 1:
            raise InvalidParameter("need D >= 0, delta >= 0, T >= 1")
        self.Q, self.D, self.delta, self.T = int(Q), int(D), float(delta), int(T)
        super().__init__()
        self.active = list(range(self.Q))
        self.sweep: list = []
        self.pos = 0
        self.first = True
        self.counts = [0] * self.Q
        self.sums = [0.0] * self.Q
        self.applied = 0
        self.eliminated = [0] * self.Q
        self.arms: list = []
        self._pu: list = []

    @property
    def taus(self):
        return [(i + 1) / self.Q for i in range(self.Q)]

    def params(self):
        return {"Q": self.Q, "D": self.D, "delta": self.delta, "T": self.T}

    def _observe(self, round, accepted, x, y):
        self._pu.append(x)

    def _eliminate(self, t):
        usable = min(t - 1, t - self.D, len(self._pu))
        if usable < 1:
            return
        while self.applied < usable:
            arm = self.arms[self.applied]
            self.counts[arm] += 1
            self.sums[arm] += self._pu[self.applied]
            self.applied += 1
        lcb_max = -math.inf
        ucbs = []
        for i in self.active:
            n = self.counts[i] if self.counts[i] > 0 else 1
            lcb, ucb = confidence_bounds(self.sums[i] / n, n, self.T, self.delta)
            ucbs.append(ucb)
            if lcb > lcb_max:
                lcb_max = lcb
        keep = []
        for i, u in zip(self.active, ucbs):
            if u >= lcb_max:
                keep.append(i)
            else:
                self.eliminated[i] = t
        self.active = keep

    def _next(self, t):
        if self.pos >= len(self.sweep):
            if not self.first:
                self._eliminate(t)
            self.first = False
            self.sweep = list(self.active)
            self.pos = 0
        arm = self.sweep[self.pos]
        self.pos += 1
        self.arms.append(arm)
        return EligibleSet.inclusive((arm + 1) / self.Q)

    def pulls(self):
        return np.bincount(np.asarray(self.arms, dtype=np.int64), minlength=self.Q)

    def summary(self):
        return {"Q": self.Q, "D": self.D, "delta": self.delta, "active": list(self.active),
                "eliminated": list(self.eliminated), "pulls": self.pulls().tolist()}


class StochasticStrategic(SuccessiveEliminationDelayed):
    """Successive elimination tuned for a gamma-discounting agent:
    eps = min(L1/T, y_min), D from the delay formula, delta = eps/L1."""

    name = "stochastic_strategic"

    def __init__(self, gamma: float, L1: float, y_min: float, T: int):
        if L1 <= 0 or y_min <= 0:
            raise InvalidParameter("need L1 > 0 and y_min > 0")
        self.gamma, self.L1, self.y_min = float(gamma), float(L1), float(y_min)
        self.eps = min(L1 / T, y_min)
        super().__init__(num_arms(T), delay_rounds(gamma, self.eps), self.eps / L1, T)

    def params(self):
        return {"gamma": self.gamma, "L1": self.L1, "y_min": self.y_min, "T": self.T}

    def summary(self):
        return {**super().summary(), "eps": self.eps}


# ---------------------------------------------------------------------------
# delay wrapper


class DelayWrapper(Mechanism):
    """Shows the inner mechanism only rounds <= t - D at round t."""

    name = "delay_wrapper"

    def __init__(self, inner: Mechanism, D: int):
        if D < 0:
            raise InvalidParameter("D must be non-negative")
        self.inner = inner
        self.D = int(D)
        self.consumed = 0

    @property
    def committed(self):
        return self.inner.committed

    @property
    def final_set(self):
        return self.inner.final_set

    def announce(self, t, visible):
        n = min(len(visible), max(0, t - self.D))
        view = visible.view(n) if hasattr(visible, "view") else visible[:n]
        out = self.inner.announce(t, view)
        self.consumed = self.inner.consumed
        return out

    def state_key(self):
        return ("DelayWrapper", self.D, self.inner.state_key())

    def describe(self):
        return {"name": self.inner.name, "params": self.inner.params(), "delay": self.D}

    def summary(self):
        return {**self.inner.summary(), "wrapper_delay": self.D}


# ---------------------------------------------------------------------------
# registry


def _registry():
    from .rppm import KLAdapter

    return {
        IterativeSearch.name: IterativeSearch,
        DelayedIterativeSearch.name: DelayedIterativeSearch,
        DelayedBinarySearch.name: DelayedBinarySearch,
        DelayedProgressiveSearch.name: DelayedProgressiveSearch,
        UCBThreshold.name: UCBThreshold,
        SuccessiveEliminationDelayed.name: SuccessiveEliminationDelayed,
        StochasticStrategic.name: StochasticStrategic,
        KLAdapter.name: KLAdapter,
    }


def mechanism_names() -> list[str]:
    return sorted(_registry())


def build_mechanism(name: str, params: Optional[dict] = None, *, T: Optional[int] = None,
                    gamma: Optional[float] = None, instance=None, delay: int = 0) -> Mechanism:
    """Instantiate a mechanism by name.

    ``T`` and ``gamma`` fill in parameters of the same name when not given;
    ``y_min``, ``d``, ``L1``, ``L2`` fall back to the instance metadata.
    ``delay > 0`` wraps the result in a :class:`DelayWrapper`.
    """
    reg = _registry()
    if name not in reg:
        raise InvalidParameter(f"unknown mechanism {name!r}; known: {sorted(reg)}")
    cls = reg[name]
    params = dict(params or {})
    sig = inspect.signature(cls.__init__)
    accepted = [p for p in sig.parameters if p != "self"]
    unknown = set(params) - set(accepted)
    if unknown:
        raise InvalidParameter(f"unknown parameters for {name!r}: {sorted(unknown)}")
    fill = {"T": T, "gamma": gamma}
    meta = dict(instance.metadata) if instance is not None else {}
    for p in accepted:
        if p in params:
            continue
        if fill.get(p) is not None:
            params[p] = fill[p]
        elif p in ("y_min", "d", "L1", "L2") and meta.get(p) is not None:
            params[p] = meta[p]
    missing = [p for p in accepted if p not in params and sig.parameters[p].default is inspect.Parameter.empty]
    if missing:
        raise InvalidParameter(f"mechanism {name!r} is missing parameters {missing}")
    mech = cls(**params)
    if delay:
        mech = DelayWrapper(mech, delay)
    return mech
