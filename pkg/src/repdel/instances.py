"""Problem instances: deterministic solution sets, per-round samplers,
assumption checkers, a chain generator and the named fixtures."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import InvalidParameter, Realization, Solution

CHECK_TOL = 1e-12
CHUNK = 4096  # rows drawn per RNG call; fixes the mapping from seed to realizations


# ---------------------------------------------------------------------------
# samplers


def _curve_c1(tau):
    """Threshold curve of two i.i.d. U[0,1] solutions with y = 1 - x."""
    tau = np.asarray(tau, dtype=np.float64)
    s = np.clip(tau, 0.0, 1.0)
    return 1.0 / 3.0 + s - s * s - s ** 3 / 3.0


@dataclass(frozen=True)
class Sampler:
    name: str
    draw: Callable  # (rng, n, K, params) -> (X, Y), each of shape (n, K)
    default_K: Optional[int] = None
    curve: Optional[Callable] = None  # (tau array, params) -> f(tau), myopic agent, inclusive sets
    argmax: Optional[Callable] = None  # params -> (tau*, f(tau*))
    doc: str = ""


def _draw_complement(rng, n, K, params):
    c = float(params.get("upper", 1.0))
    X = rng.random((n, K)) * c
    return X, 1.0 - X


def _complement_curve(tau, params):
    c = float(params.get("upper", 1.0))
    tau = np.asarray(tau, dtype=np.float64)
    out = c * _curve_c1(tau / c)
    return np.where(tau > c, 0.0, out)


def _complement_argmax(params):
    c = float(params.get("upper", 1.0))
    return c * (math.sqrt(2.0) - 1.0), c * 4.0 * (math.sqrt(2.0) - 1.0) / 3.0


def _draw_independent(rng, n, K, params):
    U = rng.random((n, 2 * K))
    return U[:, :K], U[:, K:]


SAMPLERS = {
    "two_uniform_complement": Sampler(
        "two_uniform_complement", _draw_complement, 2, _complement_curve, _complement_argmax,
        "X_i ~ U[0, upper], Y_i = 1 - X_i, two solutions per round",
    ),
    "independent_uniform": Sampler(
        "independent_uniform", _draw_independent, None, None, None,
        "X_i, Y_i independent U[0, 1]",
    ),
}


# ---------------------------------------------------------------------------
# instance model


@dataclass(frozen=True)
class InstanceModel:
    """Either a fixed solution list or a named i.i.d. sampler, plus metadata.

    ``metadata`` keys: K, d, L1, L2, y_min, notes (all optional except K).
    """

    kind: str  # "deterministic" | "stochastic"
    solutions: tuple = ()
    sampler: Optional[str] = None
    params: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.kind == "deterministic":
            sols = tuple(s if isinstance(s, Solution) else Solution(*s) for s in self.solutions)
            object.__setattr__(self, "solutions", sols)
        elif self.kind == "stochastic":
            if self.sampler not in SAMPLERS:
                raise InvalidParameter(f"unknown sampler {self.sampler!r}")
            if "K" not in self.params and SAMPLERS[self.sampler].default_K is None:
                raise InvalidParameter(f"sampler {self.sampler!r} needs parameter K")
        else:
            raise InvalidParameter(f"instance kind must be deterministic or stochastic, got {self.kind!r}")
        meta = dict(self.metadata)
        meta["K"] = self.K
        object.__setattr__(self, "metadata", meta)

    @classmethod
    def deterministic(cls, points, name: str = "", **metadata) -> "InstanceModel":
        return cls("deterministic", tuple(points), metadata=metadata, name=name)

    @classmethod
    def stochastic(cls, sampler: str, params: Optional[dict] = None, name: str = "", **metadata):
        return cls("stochastic", (), sampler, dict(params or {}), metadata, name)

    @property
    def is_deterministic(self) -> bool:
        return self.kind == "deterministic"

    @property
    def K(self) -> int:
        if self.is_deterministic:
            return len(self.solutions)
        return int(self.params.get("K", SAMPLERS[self.sampler].default_K))

    @property
    def xs(self) -> np.ndarray:
        return np.array([s.x for s in self.solutions], dtype=np.float64)

    @property
    def ys(self) -> np.ndarray:
        return np.array([s.y for s in self.solutions], dtype=np.float64)

    def sample_block(self, rng: Optional[np.random.Generator], n: int):
        """``n`` realizations as two (n, K) arrays."""
        if self.is_deterministic:
            return np.tile(self.xs, (n, 1)), np.tile(self.ys, (n, 1))
        X, Y = SAMPLERS[self.sampler].draw(rng, n, self.K, self.params)
        return np.ascontiguousarray(X), np.ascontiguousarray(Y)

    def realization(self, round: int, rng=None) -> Realization:
        if self.is_deterministic:
            return Realization.from_solutions(round, self.solutions)
        X, Y = self.sample_block(rng, 1)
        return Realization(round, X[0], Y[0])

    # analytic curve (stochastic samplers that have one)
    @property
    def has_curve(self) -> bool:
        return not self.is_deterministic and SAMPLERS[self.sampler].curve is not None and self.K == 2

    def curve(self, tau):
        if not self.has_curve:
            raise InvalidParameter(f"instance {self.name or self.sampler!r} has no analytic curve")
        return SAMPLERS[self.sampler].curve(tau, self.params)

    def curve_argmax(self) -> tuple[float, float]:
        if not self.has_curve:
            raise InvalidParameter(f"instance {self.name or self.sampler!r} has no analytic curve")
        return SAMPLERS[self.sampler].argmax(self.params)

    # serialization
    def to_dict(self) -> dict:
        meta = {k: self.metadata.get(k) for k in ("K", "d", "L1", "L2", "y_min")}
        if "notes" in self.metadata:
            meta["notes"] = self.metadata["notes"]
        out = {"kind": self.kind, "name": self.name}
        if self.is_deterministic:
            out["solutions"] = [{"x": s.x, "y": s.y} for s in self.solutions]
            out["sampler"] = None
        else:
            out["solutions"] = []
            out["sampler"] = {"name": self.sampler, "params": dict(self.params)}
        out["metadata"] = meta
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "InstanceModel":
        known = {"kind", "name", "solutions", "sampler", "metadata"}
        extra = set(doc) - known
        if extra:
            raise InvalidParameter(f"unknown instance keys: {sorted(extra)}")
        meta = {k: v for k, v in (doc.get("metadata") or {}).items() if v is not None}
        declared_K = meta.pop("K", None)
        kind = doc.get("kind")
        if kind == "deterministic":
            pts = [(float(s["x"]), float(s["y"])) for s in doc.get("solutions", [])]
            inst = cls.deterministic(pts, doc.get("name", ""), **meta)
        elif kind == "stochastic":
            smp = doc.get("sampler") or {}
            inst = cls.stochastic(smp.get("name"), smp.get("params") or {}, doc.get("name", ""), **meta)
        else:
            raise InvalidParameter(f"instance kind must be deterministic or stochastic, got {kind!r}")
        if declared_K is not None and int(declared_K) != inst.K:
            raise InvalidParameter(f"metadata K={declared_K} but instance has {inst.K} solutions")
        return inst

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def key(self) -> str:
        """Stable identity used for benchmark caching."""
        doc = self.to_dict()
        doc.pop("name", None)
        return json.dumps(doc, sort_keys=True)


class RealizationStream:
    """Sequential realizations drawn in fixed-size chunks.

    Whatever the pattern of ``take`` calls, round t always receives the same
    values for a given generator state, so per-round and vectorised
    simulation paths see identical data.
    """

    def __init__(self, instance: InstanceModel, rng: Optional[np.random.Generator], chunk: int = CHUNK):
        self.instance = instance
        self.rng = rng
        self.chunk = int(chunk)
        K = instance.K
        self._X = np.empty((0, K))
        self._Y = np.empty((0, K))
        self._pos = 0

    def take(self, n: int):
        if self.instance.is_deterministic:
            return self.instance.sample_block(None, n)
        parts_x, parts_y = [], []
        need = n
        while need > 0:
            if self._pos == len(self._X):
                self._X, self._Y = self.instance.sample_block(self.rng, self.chunk)
                self._pos = 0
            k = min(need, len(self._X) - self._pos)
            parts_x.append(self._X[self._pos:self._pos + k])
            parts_y.append(self._Y[self._pos:self._pos + k])
            self._pos += k
            need -= k
        if len(parts_x) == 1:
            return np.ascontiguousarray(parts_x[0]), np.ascontiguousarray(parts_y[0])
        if not parts_x:
            K = self.instance.K
            return np.empty((0, K)), np.empty((0, K))
        return np.concatenate(parts_x), np.concatenate(parts_y)


# ---------------------------------------------------------------------------
# checkers


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witness: Optional[tuple] = None

    def __bool__(self):
        return self.ok


def _points(instance_or_xs):
    if isinstance(instance_or_xs, InstanceModel):
        if not instance_or_xs.is_deterministic:
            raise InvalidParameter("checker needs a deterministic instance")
        return instance_or_xs.xs, instance_or_xs.ys
    arr = np.asarray(instance_or_xs, dtype=np.float64)
    if arr.ndim == 2:
        return arr[:, 0], arr[:, 1]
    return arr, None


def check_d_dense(instance, d: float, tol: float = CHECK_TOL) -> CheckResult:
    """Every ordered pair (a, b) is within d, or some third solution c has
    |X_a - X_c| <= d and |X_b - X_c| <= |X_a - X_b|.  Witness: a failing
    pair of indices."""
    if d <= 0:
        raise InvalidParameter("d must be positive")
    xs, _ = _points(instance)
    n = len(xs)
    dist = np.abs(xs[:, None] - xs[None, :])
    for a in range(n):
        for b in range(n):
            if a == b or dist[a, b] <= d + tol:
                continue
            ok = False
            for c in range(n):
                if c != a and c != b and dist[a, c] <= d + tol and dist[b, c] <= dist[a, b] + tol:
                    ok = True
                    break
            if not ok:
                return CheckResult(False, (a, b))
    return CheckResult(True)


def check_lipschitz(instance, L1: float, L2: float, tol: float = CHECK_TOL) -> CheckResult:
    """L1 |dX| <= |dY| <= L2 |dX| for every pair; witness: a failing pair."""
    if not 0 < L1 <= L2:
        raise InvalidParameter("need 0 < L1 <= L2")
    xs, ys = _points(instance)
    if ys is None:
        raise InvalidParameter("check_lipschitz needs (x, y) points")
    n = len(xs)
    for a in range(n):
        for b in range(a + 1, n):
            dx = abs(xs[a] - xs[b])
            dy = abs(ys[a] - ys[b])
            if L1 * dx > dy + tol or dy > L2 * dx + tol:
                return CheckResult(False, (a, b))
    return CheckResult(True)


def check_stochastic_lipschitz(instance: InstanceModel, L1: float, n_samples: int = 10_000,
                               seed: int = 0, tol: float = CHECK_TOL) -> CheckResult:
    """Sampled check of L1 |dX| <= |dY| within every realization.

    Witness on failure: (sample index, a, b).
    """
    if L1 <= 0:
        raise InvalidParameter("L1 must be positive")
    rng = np.random.default_rng(seed)
    X, Y = instance.sample_block(rng, n_samples)
    K = X.shape[1]
    for a in range(K):
        for b in range(a + 1, K):
            bad = L1 * np.abs(X[:, a] - X[:, b]) > np.abs(Y[:, a] - Y[:, b]) + tol
            if bad.any():
                return CheckResult(False, (int(np.argmax(bad)), a, b))
    return CheckResult(True)


# ---------------------------------------------------------------------------
# generators


def random_deterministic(K: int, rng: np.random.Generator, y_min: float = 0.0) -> InstanceModel:
    """K solutions with X ~ U[0,1], Y ~ U(y_min, 1]."""
    xs = rng.random(K)
    ys = y_min + (1.0 - y_min) * (1.0 - rng.random(K))
    return InstanceModel.deterministic(zip(xs.tolist(), ys.tolist()), f"random_K{K}",
                                       y_min=y_min if y_min > 0 else None)


def generate_deterministic_chain(K: int, d: float, L1: float, L2: float, y_min: float,
                                 seed=None) -> InstanceModel:
    """A d-dense, (L1, L2)-Lipschitz chain with every Y > y_min.

    X increases along the chain with gaps in (0, d]; Y decreases with
    consecutive slopes in [L1, L2], so all pairs satisfy the band.
    """
    if K < 1:
        raise InvalidParameter("K must be at least 1")
    if d <= 0 or not 0 < L1 <= L2 or not 0 <= y_min < 1:
        raise InvalidParameter("need d > 0, 0 < L1 <= L2, 0 <= y_min < 1")
    if K * d > 1:
        raise InvalidParameter(f"K*d = {K * d} exceeds 1")
    if y_min + L2 * (K - 1) * d >= 1:
        raise InvalidParameter(f"y budget exceeded: y_min + L2*(K-1)*d = {y_min + L2 * (K - 1) * d} >= 1")
    rng = np.random.default_rng(seed)
    gaps = d * (1.0 - rng.random(K - 1))
    slopes = L1 + (L2 - L1) * rng.random(K - 1)
    span = float(gaps.sum())
    drops = slopes * gaps
    drop = float(drops.sum())
    x0 = (1.0 - span) * rng.random()
    slack = 1.0 - y_min - drop
    y0 = y_min + drop + slack * (1.0 - rng.random())
    xs = x0 + np.concatenate([[0.0], np.cumsum(gaps)])
    ys = y0 - np.concatenate([[0.0], np.cumsum(drops)])
    xs = np.clip(xs, 0.0, 1.0)
    ys = np.clip(ys, 0.0, 1.0)
    return InstanceModel.deterministic(zip(xs.tolist(), ys.tolist()), f"chain_K{K}",
                                       d=d, L1=L1, L2=L2, y_min=y_min)


# ---------------------------------------------------------------------------
# fixtures


def p1(d: float = 0.1, y: float = 1e-14) -> InstanceModel:
    return InstanceModel.deterministic([(d, 1.0), (2 * d, y)], "P1", d=d,
                                       notes="hiding pair: low-x high-y solution plus a better one worth y to the agent")


def p2(d: float = 0.1) -> InstanceModel:
    return InstanceModel.deterministic([(d, 1.0)], "P2", d=d, notes="P1 without its second solution")


def appendix_k(eps: float = 0.1) -> InstanceModel:
    return InstanceModel.deterministic([(0.5, 1.0), (1.0, eps)], "AppendixK",
                                       notes="non-discounting pair: (1/2, 1) and (1, eps)")


def two_uniform_complement() -> InstanceModel:
    return InstanceModel.stochastic("two_uniform_complement", {"upper": 1.0}, "TwoUniformComplement",
                                    L1=1.0, L2=1.0, notes="X_i ~ U[0,1], Y_i = 1 - X_i")


def two_uniform_complement_truncated(y_min: float = 0.05) -> InstanceModel:
    if not 0 <= y_min < 1:
        raise InvalidParameter("y_min must lie in [0, 1)")
    return InstanceModel.stochastic("two_uniform_complement", {"upper": 1.0 - y_min},
                                    "TwoUniformComplementTruncated", L1=1.0, L2=1.0, y_min=y_min,
                                    notes="X_i ~ U[0, 1-y_min], Y_i = 1 - X_i")


def independent_uniform(K: int = 2) -> InstanceModel:
    return InstanceModel.stochastic("independent_uniform", {"K": K}, "IndependentUniform")


FIXTURES = {
    "P1": p1,
    "P2": p2,
    "AppendixK": appendix_k,
    "TwoUniformComplement": two_uniform_complement,
    "TwoUniformComplementTruncated": two_uniform_complement_truncated,
    "IndependentUniform": independent_uniform,
}


def fixture(name: str, *args, **kwargs) -> InstanceModel:
    """Named fixture; accepts ``"P1(0.1, 1e-14)"`` style strings as well."""
    if "(" in name:
        head, _, rest = name.partition("(")
        name = head.strip()
        inner = rest.rstrip().rstrip(")")
        args = tuple(float(a) for a in inner.split(",") if a.strip()) + tuple(args)
    try:
        factory = FIXTURES[name]
    except KeyError:
        raise InvalidParameter(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}") from None
    return factory(*args, **kwargs)
