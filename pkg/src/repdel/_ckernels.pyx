# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Mirrors ``_pykernels`` operation for operation."""
import numpy as np

from libc.math cimport log, sqrt, INFINITY


cdef inline bint _eligible(double x, int kind, double tau) nogil:
    if kind == 0:
        return x >= tau
    if kind == 1:
        return x > tau
    return kind == 2


cdef int _best(const double *xs, const double *ys, Py_ssize_t n, int kind, double tau) nogil:
    cdef int best = -1
    cdef double by = 0.0, bx = 0.0, x, y
    cdef Py_ssize_t i
    for i in range(n):
        x = xs[i]
        if not _eligible(x, kind, tau):
            continue
        y = ys[i]
        if y > by or (y == by and x > bx):
            best = <int>i
            by = y
            bx = x
    return best


cdef int _adversarial(const double *xs, const double *ys, Py_ssize_t n, int kind, double tau,
                      double eps) nogil:
    cdef double m = 0.0, floor, x, y, bx = 0.0, by = 0.0
    cdef int best
    cdef Py_ssize_t i
    for i in range(n):
        if _eligible(xs[i], kind, tau) and ys[i] > m:
            m = ys[i]
    floor = m - eps
    if 0.0 >= floor:
        best = -1
    else:
        best = -2
    for i in range(n):
        x = xs[i]
        if not _eligible(x, kind, tau):
            continue
        y = ys[i]
        if y < floor:
            continue
        if best == -2 or x < bx or (x == bx and y < by):
            best = <int>i
            bx = x
            by = y
    return best


cdef inline int _respond(const double *xs, const double *ys, Py_ssize_t n, int kind, double tau,
                         int agent, double eps) nogil:
    if agent == 0:
        return _best(xs, ys, n, kind, tau)
    return _adversarial(xs, ys, n, kind, tau, eps)


def best_response(const double[::1] xs, const double[::1] ys, int kind, double tau):
    return _best(&xs[0], &ys[0], xs.shape[0], kind, tau) if xs.shape[0] else -1


def adversarial_response(const double[::1] xs, const double[::1] ys, int kind, double tau, double eps):
    if xs.shape[0] == 0:
        return -1
    return _adversarial(&xs[0], &ys[0], xs.shape[0], kind, tau, eps)


def respond(const double[::1] xs, const double[::1] ys, int kind, double tau, int agent, double eps):
    if xs.shape[0] == 0:
        return -1
    return _respond(&xs[0], &ys[0], xs.shape[0], kind, tau, agent, eps)


def threshold_utilities(X, Y, int kind, double tau):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], K = Xv.shape[1], r
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef int b
    if K == 0:
        return out_arr
    with nogil:
        for r in range(n):
            b = _best(&Xv[r, 0], &Yv[r, 0], K, kind, tau)
            if b >= 0:
                out[r] = Xv[r, b]
    return out_arr


cdef inline Py_ssize_t _bisect_right(const double[::1] a, double x) nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if x < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def threshold_curve(X, Y, grid):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef const double[::1] g = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], K = Xv.shape[1], G = g.shape[0]
    diff_arr = np.zeros(G + 1, dtype=np.float64)
    diff2_arr = np.zeros(G + 1, dtype=np.float64)
    order_arr = np.empty(max(K, 1), dtype=np.intp)
    cdef double[::1] diff = diff_arr
    cdef double[::1] diff2 = diff2_arr
    cdef Py_ssize_t[::1] order = order_arr
    cdef Py_ssize_t r, k, j, i, lo, hi, cur
    cdef double x, y, bx, by, sq
    cdef int best
    with nogil:
        for r in range(n):
            # stable insertion sort of indices by x descending
            for k in range(K):
                cur = k
                j = k
                while j > 0 and Xv[r, order[j - 1]] < Xv[r, cur]:
                    order[j] = order[j - 1]
                    j -= 1
                order[j] = cur
            best = -1
            bx = 0.0
            by = 0.0
            for k in range(K):
                i = order[k]
                y = Yv[r, i]
                x = Xv[r, i]
                if best < 0 or y > by or (y == by and x > bx):
                    best = <int>i
                    bx = x
                    by = y
                hi = _bisect_right(g, x)
                if k + 1 < K:
                    lo = _bisect_right(g, Xv[r, order[k + 1]])
                else:
                    lo = 0
                if lo < hi:
                    diff[lo] += bx
                    diff[hi] -= bx
                    sq = bx * bx
                    diff2[lo] += sq
                    diff2[hi] -= sq
    return np.cumsum(diff_arr[:G]), np.cumsum(diff2_arr[:G])


def run_ucb(X, Y, int Q, int agent, double eps):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t T = Xv.shape[0], K = Xv.shape[1], t
    arms_a = np.empty(T, dtype=np.int32)
    props_a = np.empty(T, dtype=np.int32)
    pu_a = np.empty(T, dtype=np.float64)
    au_a = np.empty(T, dtype=np.float64)
    counts_a = np.zeros(Q, dtype=np.int64)
    sums_a = np.zeros(Q, dtype=np.float64)
    taus_a = np.array([(i + 1) / <double>Q for i in range(Q)], dtype=np.float64)
    cdef int[::1] arms = arms_a
    cdef int[::1] props = props_a
    cdef double[::1] pu = pu_a
    cdef double[::1] au = au_a
    cdef long long[::1] counts = counts_a
    cdef double[::1] sums = sums_a
    cdef double[::1] taus = taus_a
    cdef int arm, i, p
    cdef double lt, bidx, idx, r, a
    cdef long long n
    with nogil:
        for t in range(T):
            if t < Q:
                arm = <int>t
            else:
                lt = log(<double>(t + 1))
                arm = 0
                bidx = -INFINITY
                for i in range(Q):
                    n = counts[i]
                    idx = sums[i] / <double>n + sqrt(2.0 * lt / <double>n)
                    if idx > bidx:
                        bidx = idx
                        arm = i
            if K > 0:
                p = _respond(&Xv[t, 0], &Yv[t, 0], K, 0, taus[arm], agent, eps)
            else:
                p = -1
            if p >= 0:
                r = Xv[t, p]
                a = Yv[t, p]
            else:
                r = 0.0
                a = 0.0
            arms[t] = arm
            props[t] = p
            pu[t] = r
            au[t] = a
            counts[arm] += 1
            sums[arm] += r
    return arms_a, props_a, pu_a, au_a


def run_se(X, Y, int Q, long long D, double delta, long long horizon, int agent, double eps):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t T = Xv.shape[0], K = Xv.shape[1]
    arms_a = np.empty(T, dtype=np.int32)
    props_a = np.empty(T, dtype=np.int32)
    pu_a = np.empty(T, dtype=np.float64)
    au_a = np.empty(T, dtype=np.float64)
    elim_a = np.zeros(Q, dtype=np.int64)
    counts_a = np.zeros(Q, dtype=np.int64)
    sums_a = np.zeros(Q, dtype=np.float64)
    active_a = np.arange(Q, dtype=np.int32)
    ucb_a = np.empty(Q, dtype=np.float64)
    taus_a = np.array([(i + 1) / <double>Q for i in range(Q)], dtype=np.float64)
    cdef int[::1] arms = arms_a
    cdef int[::1] props = props_a
    cdef double[::1] pu = pu_a
    cdef double[::1] au = au_a
    cdef long long[::1] elim = elim_a
    cdef long long[::1] counts = counts_a
    cdef double[::1] sums = sums_a
    cdef int[::1] active = active_a
    cdef double[::1] ucbs = ucb_a
    cdef double[::1] taus = taus_a
    cdef double log_h = log(<double>horizon)
    cdef long long applied = 0, t = 0, nxt, usable, n
    cdef int n_active = Q, k, i, p, m
    cdef bint first = True
    cdef double lcb_max, mu, w, lcb, r, a
    with nogil:
        while t < T:
            if not first:
                nxt = t + 1
                usable = nxt - D
                if t < usable:
                    usable = t
                if usable >= 1:
                    while applied < usable:
                        counts[arms[applied]] += 1
                        sums[arms[applied]] += pu[applied]
                        applied += 1
                    lcb_max = -INFINITY
                    for k in range(n_active):
                        i = active[k]
                        n = counts[i] if counts[i] > 0 else 1
                        mu = sums[i] / <double>n
                        w = sqrt(2.0 * log_h / <double>n)
                        lcb = mu - w - delta
                        ucbs[k] = mu + w + delta
                        if lcb > lcb_max:
                            lcb_max = lcb
                    m = 0
                    for k in range(n_active):
                        i = active[k]
                        if ucbs[k] >= lcb_max:
                            active[m] = i
                            m += 1
                        else:
                            elim[i] = nxt
                    n_active = m
            first = False
            for k in range(n_active):
                if t >= T:
                    break
                i = active[k]
                if K > 0:
                    p = _respond(&Xv[t, 0], &Yv[t, 0], K, 0, taus[i], agent, eps)
                else:
                    p = -1
                if p >= 0:
                    r = Xv[t, p]
                    a = Yv[t, p]
                else:
                    r = 0.0
                    a = 0.0
                arms[t] = i
                props[t] = p
                pu[t] = r
                au[t] = a
                t += 1
    return arms_a, props_a, pu_a, au_a, elim_a
