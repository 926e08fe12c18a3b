"""Domain types shared by every module: solutions, eligible sets, round records.

Utilities are plain 64-bit floats in [0, 1].  A proposal is either ``None``
(the null solution) or an index into the round's realization.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Union, overload

import numpy as np

EXPLICIT_TOL = 1e-12

Proposal = Optional[int]
NULL: Proposal = None


class InvalidParameter(ValueError):
    """A component was configured with parameters outside its domain."""


class InvalidProposal(ValueError):
    """A proposal index does not point into the round's realization."""


def check_utility(value: float, name: str = "utility") -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise InvalidParameter(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class Solution:
    """One option held by the agent: principal utility ``x``, agent utility ``y``."""

    x: float
    y: float
    id: object = None

    def __post_init__(self):
        object.__setattr__(self, "x", check_utility(self.x, "x"))
        object.__setattr__(self, "y", check_utility(self.y, "y"))


class SetKind(enum.IntEnum):
    INCLUSIVE = 0
    STRICT = 1
    ACCEPT_ALL = 2
    ACCEPT_NONE = 3
    EXPLICIT = 4


@dataclass(frozen=True)
class EligibleSet:
    """The screening rule announced by the principal for one round.

    Threshold sets only look at the principal's utility: ``INCLUSIVE`` keeps
    ``x >= tau`` and ``STRICT`` keeps ``x > tau``.  ``EXPLICIT`` keeps the
    listed ``(x, y)`` points up to ``tol``.
    """

    kind: SetKind
    tau: float = 0.0
    points: tuple = ()
    tol: float = EXPLICIT_TOL

    @classmethod
    def inclusive(cls, tau: float) -> "EligibleSet":
        return cls(SetKind.INCLUSIVE, check_utility(tau, "tau"))

    @classmethod
    def strict(cls, tau: float) -> "EligibleSet":
        return cls(SetKind.STRICT, check_utility(tau, "tau"))

    @classmethod
    def accept_all(cls) -> "EligibleSet":
        return cls(SetKind.ACCEPT_ALL)

    @classmethod
    def accept_none(cls) -> "EligibleSet":
        return cls(SetKind.ACCEPT_NONE)

    @classmethod
    def explicit(cls, points: Iterable[tuple[float, float]], tol: float = EXPLICIT_TOL) -> "EligibleSet":
        pts = tuple((check_utility(x, "x"), check_utility(y, "y")) for x, y in points)
        return cls(SetKind.EXPLICIT, 0.0, pts, float(tol))

    def contains_xy(self, x: float, y: float) -> bool:
        kind = self.kind
        if kind == SetKind.INCLUSIVE:
            return x >= self.tau
        if kind == SetKind.STRICT:
            return x > self.tau
        if kind == SetKind.ACCEPT_ALL:
            return True
        if kind == SetKind.ACCEPT_NONE:
            return False
        return any(abs(x - px) <= self.tol and abs(y - py) <= self.tol for px, py in self.points)

    def contains(self, sol: Solution) -> bool:
        return self.contains_xy(sol.x, sol.y)

    @property
    def label(self) -> str:
        """Short text form used in CSV traces."""
        if self.kind == SetKind.INCLUSIVE:
            return f"ge:{self.tau!r}"
        if self.kind == SetKind.STRICT:
            return f"gt:{self.tau!r}"
        if self.kind == SetKind.ACCEPT_ALL:
            return "all"
        if self.kind == SetKind.ACCEPT_NONE:
            return "none"
        return f"explicit:{len(self.points)}"

    @classmethod
    def from_label(cls, label: str) -> "EligibleSet":
        if label == "all":
            return cls.accept_all()
        if label == "none":
            return cls.accept_none()
        head, _, rest = label.partition(":")
        if head == "ge":
            return cls.inclusive(float(rest))
        if head == "gt":
            return cls.strict(float(rest))
        raise InvalidParameter(f"cannot parse eligible-set label {label!r}")


def is_eligible(eligible: EligibleSet, sol: Solution) -> bool:
    return eligible.contains(sol)


class Realization:
    """Ex-post utilities of every non-null solution in one round.

    Stored as two read-only float arrays; ``solutions`` materialises
    :class:`Solution` objects on demand.
    """

    __slots__ = ("round", "xs", "ys", "_solutions")

    def __init__(self, round: int, xs, ys, solutions: Optional[tuple] = None):
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise InvalidParameter("xs and ys must be 1-d arrays of equal length")
        xs.flags.writeable = False
        ys.flags.writeable = False
        self.round = int(round)
        self.xs = xs
        self.ys = ys
        self._solutions = solutions

    @classmethod
    def from_solutions(cls, round: int, solutions: Sequence[Solution]) -> "Realization":
        sols = tuple(solutions)
        return cls(round, [s.x for s in sols], [s.y for s in sols], sols)

    @property
    def solutions(self) -> tuple:
        if self._solutions is None:
            self._solutions = tuple(Solution(float(x), float(y), i) for i, (x, y) in enumerate(zip(self.xs, self.ys)))
        return self._solutions

    def __len__(self) -> int:
        return len(self.xs)

    def __repr__(self) -> str:
        pts = ", ".join(f"({x:.4g}, {y:.4g})" for x, y in zip(self.xs, self.ys))
        return f"Realization(round={self.round}, [{pts}])"


class Outcome(NamedTuple):
    accepted: bool
    principal_utility: float
    agent_utility_raw: float


def round_outcome(eligible: EligibleSet, realization: Realization, proposal: Proposal) -> Outcome:
    """Resolve one round: an eligible non-null proposal pays both sides, anything else pays zero."""
    if proposal is None:
        return Outcome(False, 0.0, 0.0)
    if not (0 <= proposal < len(realization)):
        raise InvalidProposal(f"proposal index {proposal} out of range for {len(realization)} solutions")
    x = float(realization.xs[proposal])
    y = float(realization.ys[proposal])
    if eligible.contains_xy(x, y):
        return Outcome(True, x, y)
    return Outcome(False, 0.0, 0.0)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    eligible: EligibleSet
    proposal: Proposal
    accepted: bool
    principal_utility: float
    agent_utility_raw: float
    agent_utility_discounted: float
    # utilities of the proposed solution whether or not it was accepted (nan for null)
    proposal_x: float = math.nan
    proposal_y: float = math.nan


class History(Sequence[RoundRecord]):
    """Columnar round transcript.

    Records are rebuilt on indexing; the arrays are what the engine and the
    regret computations read.  ``gamma`` is the agent's discount factor used
    for ``agent_utility_discounted``.
    """

    def __init__(self, capacity: int = 16, gamma: float = 1.0):
        capacity = max(int(capacity), 1)
        self.gamma = float(gamma)
        self._n = 0
        self._set_ids = np.empty(capacity, dtype=np.int32)
        self._proposal = np.empty(capacity, dtype=np.int32)
        self._accepted = np.empty(capacity, dtype=np.bool_)
        self._principal = np.empty(capacity, dtype=np.float64)
        self._agent = np.empty(capacity, dtype=np.float64)
        self._px = np.empty(capacity, dtype=np.float64)
        self._py = np.empty(capacity, dtype=np.float64)
        self.sets: list[EligibleSet] = []
        self._set_index: dict[EligibleSet, int] = {}

    # -- building ---------------------------------------------------------
    def _grow(self, need: int) -> None:
        cap = len(self._proposal)
        if need <= cap:
            return
        new = max(need, 2 * cap)
        for name in ("_set_ids", "_proposal", "_accepted", "_principal", "_agent", "_px", "_py"):
            old = getattr(self, name)
            arr = np.empty(new, dtype=old.dtype)
            arr[: self._n] = old[: self._n]
            setattr(self, name, arr)

    def intern(self, eligible: EligibleSet) -> int:
        idx = self._set_index.get(eligible)
        if idx is None:
            idx = len(self.sets)
            self.sets.append(eligible)
            self._set_index[eligible] = idx
        return idx

    def append(self, eligible: EligibleSet, proposal: Proposal, outcome: Outcome,
               proposal_x: float = math.nan, proposal_y: float = math.nan) -> None:
        self.fill(1, eligible, proposal, outcome, proposal_x, proposal_y)

    def fill(self, n: int, eligible: EligibleSet, proposal: Proposal, outcome: Outcome,
             proposal_x: float = math.nan, proposal_y: float = math.nan) -> None:
        """Append ``n`` identical rounds."""
        if n <= 0:
            return
        i, j = self._n, self._n + n
        self._grow(j)
        self._set_ids[i:j] = self.intern(eligible)
        self._proposal[i:j] = -1 if proposal is None else proposal
        self._accepted[i:j] = outcome.accepted
        self._principal[i:j] = outcome.principal_utility
        self._agent[i:j] = outcome.agent_utility_raw
        self._px[i:j] = proposal_x
        self._py[i:j] = proposal_y
        self._n = j

    def extend_arrays(self, set_ids, sets: Sequence[EligibleSet], proposal, accepted,
                      principal, agent, px, py) -> None:
        """Bulk append from arrays; ``set_ids`` index into ``sets``."""
        n = len(proposal)
        remap = np.array([self.intern(s) for s in sets], dtype=np.int32)
        i, j = self._n, self._n + n
        self._grow(j)
        self._set_ids[i:j] = remap[np.asarray(set_ids)]
        self._proposal[i:j] = proposal
        self._accepted[i:j] = accepted
        self._principal[i:j] = principal
        self._agent[i:j] = agent
        self._px[i:j] = px
        self._py[i:j] = py
        self._n = j

    def copy(self) -> "History":
        h = History(max(self._n, 1), self.gamma)
        h.extend_arrays(self.set_ids, self.sets, self.proposals, self.accepted, self.principal_utilities,
                        self.agent_utilities, *self.proposal_xy)
        return h

    def overwrite(self, i: int, proposal: Proposal, outcome: Outcome,
                  proposal_x: float = math.nan, proposal_y: float = math.nan) -> None:
        """Replace the proposal and outcome stored for index ``i`` (test tooling)."""
        if not 0 <= i < self._n:
            raise IndexError(i)
        self._proposal[i] = -1 if proposal is None else proposal
        self._accepted[i] = outcome.accepted
        self._principal[i] = outcome.principal_utility
        self._agent[i] = outcome.agent_utility_raw
        self._px[i] = proposal_x
        self._py[i] = proposal_y

    @classmethod
    def from_records(cls, records: Iterable[RoundRecord], gamma: float = 1.0) -> "History":
        records = list(records)
        h = cls(len(records), gamma)
        for k, r in enumerate(records, start=1):
            if r.round != k:
                raise InvalidParameter(f"record {k} carries round {r.round}")
            h.append(r.eligible, r.proposal, Outcome(r.accepted, r.principal_utility, r.agent_utility_raw),
                     r.proposal_x, r.proposal_y)
        return h

    # -- reading ----------------------------------------------------------
    def __len__(self) -> int:
        return self._n

    def _record(self, i: int) -> RoundRecord:
        p = int(self._proposal[i])
        raw = float(self._agent[i])
        return RoundRecord(
            round=i + 1,
            eligible=self.sets[self._set_ids[i]],
            proposal=None if p < 0 else p,
            accepted=bool(self._accepted[i]),
            principal_utility=float(self._principal[i]),
            agent_utility_raw=raw,
            agent_utility_discounted=self.gamma ** i * raw,
            proposal_x=float(self._px[i]),
            proposal_y=float(self._py[i]),
        )

    @overload
    def __getitem__(self, i: int) -> RoundRecord: ...
    @overload
    def __getitem__(self, i: slice) -> list[RoundRecord]: ...

    def __getitem__(self, i: Union[int, slice]):
        if isinstance(i, slice):
            return [self._record(k) for k in range(*i.indices(self._n))]
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(i)
        return self._record(i)

    def __iter__(self) -> Iterator[RoundRecord]:
        for k in range(self._n):
            yield self._record(k)

    def fields(self, i: int) -> tuple[bool, float, float]:
        """(accepted, principal utility, raw agent utility) of the record at index ``i``."""
        return bool(self._accepted[i]), float(self._principal[i]), float(self._agent[i])

    def view(self, n: int) -> "HistoryView":
        return HistoryView(self, min(max(n, 0), self._n))

    @property
    def principal_utilities(self) -> np.ndarray:
        return self._principal[: self._n]

    @property
    def agent_utilities(self) -> np.ndarray:
        return self._agent[: self._n]

    @property
    def accepted(self) -> np.ndarray:
        return self._accepted[: self._n]

    @property
    def proposals(self) -> np.ndarray:
        return self._proposal[: self._n]

    @property
    def proposal_xy(self) -> tuple[np.ndarray, np.ndarray]:
        return self._px[: self._n], self._py[: self._n]

    @property
    def set_ids(self) -> np.ndarray:
        return self._set_ids[: self._n]

    def discounted_agent_utilities(self) -> np.ndarray:
        return self.gamma ** np.arange(self._n, dtype=np.float64) * self.agent_utilities

    def transcript(self) -> list[tuple[str, bool, float]]:
        """(set label, accepted, principal utility) per round; what the principal sees."""
        labels = [s.label for s in self.sets]
        return [(labels[s], bool(a), float(u)) for s, a, u in zip(self.set_ids, self.accepted, self.principal_utilities)]


class HistoryView(Sequence[RoundRecord]):
    """Read-only prefix of a :class:`History`."""

    __slots__ = ("_h", "_n")

    def __init__(self, history: History, n: int):
        self._h = history
        self._n = n

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._h._record(k) for k in range(*i.indices(self._n))]
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(i)
        return self._h._record(i)

    def __iter__(self):
        for k in range(self._n):
            yield self._h._record(k)

    def fields(self, i: int) -> tuple[bool, float, float]:
        if not 0 <= i < self._n:
            raise IndexError(i)
        return self._h.fields(i)


def record_fields(records: Sequence[RoundRecord], i: int) -> tuple[bool, float, float]:
    """(accepted, principal utility, raw agent utility) of ``records[i]``.

    Reads the columnar arrays directly when ``records`` is a History or a view of one.
    """
    f = getattr(records, "fields", None)
    if f is not None:
        return f(i)
    r = records[i]
    return r.accepted, r.principal_utility, r.agent_utility_raw
