"""Pure-Python kernels.  Reference implementation for ``_ckernels.pyx``.

Both modules expose the same functions and must return bit-identical
results: same loop order, same floating-point expression order.
Set codes: 0 inclusive, 1 strict, 2 accept-all, 3 accept-none.
Agent codes: 0 myopic best response, 1 adversarial eps-best response.
"""
from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

MYOPIC = 0
ADVERSARIAL = 1


def _eligible(x, kind, tau):
    if kind == 0:
        return x >= tau
    if kind == 1:
        return x > tau
    return kind == 2


def best_response(xs, ys, kind, tau):
    """Index of the agent's best response (-1 for null).

    Maximises agent utility; ties go to the larger principal utility, then
    to the lower index.  Null is worth (0, 0) to both sides.
    """
    best = -1
    by = 0.0
    bx = 0.0
    for i in range(len(xs)):
        x = xs[i]
        if not _eligible(x, kind, tau):
            continue
        y = ys[i]
        if y > by or (y == by and x > bx):
            best = i
            by = y
            bx = x
    return best


def adversarial_response(xs, ys, kind, tau, eps):
    """Worst eps-best response for the principal (-1 for null)."""
    m = 0.0
    n = len(xs)
    for i in range(n):
        if _eligible(xs[i], kind, tau) and ys[i] > m:
            m = ys[i]
    floor = m - eps
    if 0.0 >= floor:
        best, bx, by = -1, 0.0, 0.0
    else:
        best, bx, by = -2, 0.0, 0.0
    for i in range(n):
        x = xs[i]
        if not _eligible(x, kind, tau):
            continue
        y = ys[i]
        if y < floor:
            continue
        if best == -2 or x < bx or (x == bx and y < by):
            best = i
            bx = x
            by = y
    return best


def respond(xs, ys, kind, tau, agent, eps):
    if agent == MYOPIC:
        return best_response(xs, ys, kind, tau)
    return adversarial_response(xs, ys, kind, tau, eps)


def threshold_utilities(X, Y, kind, tau):
    """Principal utility of the myopic best response in each row of (X, Y)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    xs_rows = X.tolist()
    ys_rows = Y.tolist()
    out = np.zeros(len(xs_rows), dtype=np.float64)
    for r in range(len(xs_rows)):
        xs = xs_rows[r]
        b = best_response(xs, ys_rows[r], kind, tau)
        if b >= 0:
            out[r] = xs[b]
    return out


def threshold_curve(X, Y, grid):
    """Summed utility and squared utility of the best response to E_tau, per grid point.

    ``grid`` must be sorted ascending.  Each realization contributes a
    piecewise-constant function of the threshold; it is added through a
    difference array and integrated once at the end.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    grid_list = np.ascontiguousarray(grid, dtype=np.float64).tolist()
    G = len(grid_list)
    diff = [0.0] * (G + 1)
    diff2 = [0.0] * (G + 1)
    K = X.shape[1]
    for xs, ys in zip(X.tolist(), Y.tolist()):
        order = sorted(range(K), key=lambda i: -xs[i])
        best = -1
        bx = 0.0
        by = 0.0
        for k in range(K):
            i = order[k]
            y = ys[i]
            x = xs[i]
            if best < 0 or y > by or (y == by and x > bx):
                best = i
                bx = x
                by = y
            hi = bisect_right(grid_list, x)
            lo = bisect_right(grid_list, xs[order[k + 1]]) if k + 1 < K else 0
            if lo < hi:
                diff[lo] += bx
                diff[hi] -= bx
                sq = bx * bx
                diff2[lo] += sq
                diff2[hi] -= sq
    sums = np.cumsum(np.array(diff[:G]))
    sumsq = np.cumsum(np.array(diff2[:G]))
    return sums, sumsq


def run_ucb(X, Y, Q, agent, eps):
    """UCB1 over thresholds {1/Q, ..., Q/Q} (inclusive), one round per row of X.

    Returns (arm, proposal, principal utility, agent utility) per round.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    T = X.shape[0]
    xs_rows = X.tolist()
    ys_rows = Y.tolist()
    arms = np.empty(T, dtype=np.int32)
    props = np.empty(T, dtype=np.int32)
    pu = np.empty(T, dtype=np.float64)
    au = np.empty(T, dtype=np.float64)
    counts = [0] * Q
    sums = [0.0] * Q
    taus = [(i + 1) / Q for i in range(Q)]
    for t in range(T):
        if t < Q:
            arm = t
        else:
            lt = math.log(t + 1)
            arm = 0
            bidx = -math.inf
            for i in range(Q):
                n = counts[i]
                idx = sums[i] / n + math.sqrt(2.0 * lt / n)
                if idx > bidx:
                    bidx = idx
                    arm = i
        xs = xs_rows[t]
        ys = ys_rows[t]
        p = respond(xs, ys, 0, taus[arm], agent, eps)
        if p >= 0:
            r = xs[p]
            a = ys[p]
        else:
            r = 0.0
            a = 0.0
        arms[t] = arm
        props[t] = p
        pu[t] = r
        au[t] = a
        counts[arm] += 1
        sums[arm] += r
    return arms, props, pu, au


def run_se(X, Y, Q, D, delta, horizon, agent, eps):
    """Successive elimination with D-delayed feedback over thresholds {i/Q}.

    Round-robin sweeps over the active arms; at the start of every sweep
    after the first, statistics from rounds <= t - D (t = next round) are
    used to drop arms whose UCB falls below another arm's LCB.
    Returns per-round arrays plus the round at which each arm was
    eliminated (0 = never).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    T = X.shape[0]
    xs_rows = X.tolist()
    ys_rows = Y.tolist()
    arms = np.empty(T, dtype=np.int32)
    props = np.empty(T, dtype=np.int32)
    pu = np.empty(T, dtype=np.float64)
    au = np.empty(T, dtype=np.float64)
    eliminated = np.zeros(Q, dtype=np.int64)
    counts = [0] * Q
    sums = [0.0] * Q
    taus = [(i + 1) / Q for i in range(Q)]
    active = list(range(Q))
    log_h = math.log(horizon)
    applied = 0  # rounds folded into the statistics
    t = 0  # rounds played
    first = True
    while t < T:
        if not first:
            nxt = t + 1
            usable = min(t, nxt - D)
            if usable >= 1:
                while applied < usable:
                    counts[arms[applied]] += 1
                    sums[arms[applied]] += pu[applied]
                    applied += 1
                lcb_max = -math.inf
                ucbs = []
                for i in active:
                    n = counts[i] if counts[i] > 0 else 1
                    mu = sums[i] / n
                    w = math.sqrt(2.0 * log_h / n)
                    lcb = mu - w - delta
                    ucbs.append(mu + w + delta)
                    if lcb > lcb_max:
                        lcb_max = lcb
                keep = []
                for i, u in zip(active, ucbs):
                    if u >= lcb_max:
                        keep.append(i)
                    else:
                        eliminated[i] = nxt
                active = keep
        first = False
        for i in active:
            if t >= T:
                break
            xs = xs_rows[t]
            ys = ys_rows[t]
            p = respond(xs, ys, 0, taus[i], agent, eps)
            if p >= 0:
                r = xs[p]
                a = ys[p]
            else:
                r = 0.0
                a = 0.0
            arms[t] = i
            props[t] = p
            pu[t] = r
            au[t] = a
            t += 1
    return arms, props, pu, au, eliminated
