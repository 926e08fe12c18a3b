"""Repeated posted prices against a fixed-value buyer, and the adapter that
runs any such pricer as a delegation mechanism (price p -> accept X >= p)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import EligibleSet, InvalidParameter, check_utility
from .mechanisms import Mechanism


@dataclass(frozen=True)
class RppmEnvironment:
    value: float
    T: int

    def __post_init__(self):
        check_utility(self.value, "value")
        if self.T < 1:
            raise InvalidParameter("T must be at least 1")

    def buys(self, price: float) -> bool:
        return self.value >= price


class Pricer:
    """``propose()`` returns the next price; ``observe(sold)`` feeds back the buyer's answer.

    Once ``committed`` the pricer posts ``final_price`` forever and ignores feedback.
    """

    committed = False
    final_price = 0.0

    def propose(self) -> float:
        raise NotImplementedError

    def observe(self, sold: bool) -> None:
        pass


class ConstantPricer(Pricer):
    def __init__(self, price: float):
        self.final_price = check_utility(price, "price")
        self.committed = True

    def propose(self):
        return self.final_price


class KLPricer(Pricer):
    """Phased grid search with doubly exponentially shrinking steps.

    Phase k walks upward from ``lo`` in steps of 2^(-2^k), never above ``hi``
    (and not at ``hi`` once a price there was refused).  A sale raises
    ``lo``; a refusal sets ``hi`` and ends the phase.  The phase whose step
    is at most 1/T is the last; the pricer then posts ``lo`` forever.
    Every phase costs O(1) regret, and there are O(log log T) of them.
    """

    def __init__(self, T: int):
        if T < 2:
            raise InvalidParameter("T must be at least 2")
        self.T = int(T)
        self.lo = 0.0
        self.hi = 1.0
        self.hi_refused = False
        self.step = 0.5
        self.phase = 0
        self.pending: Optional[float] = None
        self.committed = False
        self.final_price = 0.0
        self.n_probes = 0

    def _end_phase(self):
        if self.step <= 1.0 / self.T:
            self.committed = True
            self.final_price = self.lo
        else:
            self.step = self.step * self.step
            self.phase += 1

    def propose(self) -> float:
        if self.pending is not None:
            raise RuntimeError("previous price has no feedback yet")
        while not self.committed:
            p = self.lo + self.step
            if p < self.hi or (p == self.hi and not self.hi_refused):
                self.pending = p
                self.n_probes += 1
                return p
            self._end_phase()
        return self.final_price

    def observe(self, sold: bool) -> None:
        if self.committed:
            return
        p, self.pending = self.pending, None
        if p is None:
            raise RuntimeError("feedback without a posted price")
        if sold:
            self.lo = p
        else:
            self.hi = p
            self.hi_refused = True
            self._end_phase()


def kl_fixed_value_pricer(T: int) -> KLPricer:
    return KLPricer(T)


@dataclass
class RppmResult:
    prices: np.ndarray
    sold: np.ndarray
    revenue: np.ndarray
    regret: float

    @property
    def revenue_trace(self) -> np.ndarray:
        return self.revenue


def run_rppm(pricer: Pricer, env: RppmEnvironment) -> RppmResult:
    """Play ``env.T`` rounds; regret = T*v - total revenue.

    Once the pricer commits, the remaining rounds are filled in bulk.
    """
    T, v = env.T, env.value
    prices = np.empty(T)
    sold = np.zeros(T, dtype=bool)
    t = 0
    while t < T:
        if pricer.committed:
            p = pricer.final_price
            prices[t:] = p
            sold[t:] = v >= p
            break
        p = pricer.propose()
        if pricer.committed:  # proposing may finish the last phase
            continue
        s = v >= p
        prices[t] = p
        sold[t] = s
        pricer.observe(s)
        t += 1
    revenue = np.where(sold, prices, 0.0)
    return RppmResult(prices, sold, revenue, T * v - float(revenue.sum()))


class KLAdapter(Mechanism):
    """Runs a pricer as a delegation mechanism: price p is announced as the
    inclusive threshold p, and an accepted proposal counts as a sale."""

    name = "kl_adapter"

    def __init__(self, T: int, pricer: Optional[Pricer] = None):
        super().__init__()
        self.T = int(T)
        self.pricer = pricer if pricer is not None else KLPricer(T)
        self.probe_round = 0
        self.fb = None
        self.waiting = False

    def params(self):
        return {"T": self.T}

    def _observe(self, round, accepted, x, y):
        if round == self.probe_round:
            self.fb = accepted

    def _next(self, t):
        if self.committed:
            return self.final_set
        pr = self.pricer
        if self.waiting:
            if self.fb is None:
                return EligibleSet.inclusive(getattr(pr, "lo", pr.final_price))
            pr.observe(self.fb)
            self.fb = None
            self.waiting = False
        p = pr.propose()
        if pr.committed:
            return self.commit(EligibleSet.inclusive(pr.final_price))
        self.probe_round = t
        self.waiting = True
        return EligibleSet.inclusive(p)

    def state_key(self):
        pr = self.pricer
        return ("KLAdapter", self.committed, self.probe_round, self.fb, self.waiting,
                tuple(sorted((k, v) for k, v in vars(pr).items())))

    def summary(self):
        pr = self.pricer
        return {**super().summary(), "lo": getattr(pr, "lo", pr.final_price),
                "hi": getattr(pr, "hi", 1.0), "n_probes": getattr(pr, "n_probes", 0)}


def delegation_adapter(pricer: Pricer, T: int) -> KLAdapter:
    return KLAdapter(T, pricer)
