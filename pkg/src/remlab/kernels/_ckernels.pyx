# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np

from libc.math cimport log, exp, INFINITY
from libc.stdint cimport uint64_t, int64_t, uint8_t
from libc.stdlib cimport malloc, free, realloc

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0

cdef int EXPLORATION = 1
cdef uint8_t FLAG_TOP = 1
cdef uint8_t FLAG_TOP_ALONE = 2


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double open_unif(uint64_t w) nogil:
    return (<double>(w >> 11) + 0.5) * INV53


cdef inline double unif(uint64_t w) nogil:
    return <double>(w >> 11) * INV53


cdef inline double rates(const double[::1] tau, int n, double eta, int mode,
                         int64_t x, double* rate, double* weight) nogil:
    cdef double tx = tau[x]
    cdef double msum = 0.0
    cdef double ty
    cdef int i
    for i in range(n):
        ty = tau[x ^ (<int64_t>1 << i)]
        msum += ty if ty < tx else tx
    if mode == EXPLORATION:
        if tx >= eta:
            rate[0] = msum / n
            weight[0] = tx
        else:
            rate[0] = eta * msum / (n * tx)
            weight[0] = eta
    else:
        rate[0] = msum / (n * tx)
        weight[0] = 1.0
    return msum


cdef inline int64_t jump(const double[::1] tau, int n, int64_t x, double msum, double u) nogil:
    cdef double tx = tau[x]
    cdef double target = u * msum
    cdef double c = 0.0
    cdef double ty
    cdef int i
    for i in range(n):
        ty = tau[x ^ (<int64_t>1 << i)]
        c += ty if ty < tx else tx
        if target < c:
            return x ^ (<int64_t>1 << i)
    return x ^ (<int64_t>1 << (n - 1))


cdef inline double f_val(double l, double alpha_n, double two_nb2, double pole) nogil:
    cdef double L
    if l <= 0.0:
        return 0.0
    L = log(l)
    if L >= pole:
        return INFINITY
    return exp((alpha_n - L / two_nb2) * L) / (1.0 - L / pole)


def f_value(double l, double alpha_n, double two_nb2, double pole):
    return f_val(l, alpha_n, two_nb2, pole)


def simulate_path(tau_in, int n, double eta, int mode, int64_t start, double horizon,
                  uint64_t key, int64_t max_events):
    cdef const double[::1] tau = np.ascontiguousarray(tau_in, dtype=np.float64)
    cdef uint64_t state = key
    cdef int64_t x = start
    cdef double t = 0.0, comp = 0.0, msum, rate, w, e, h, remaining, y, tt
    cdef int64_t events = 0
    cdef bint censored = False
    states = []
    holds = []
    while True:
        msum = rates(tau, n, eta, mode, x, &rate, &w)
        state += GOLDEN
        e = -log(open_unif(mix64(state)))
        h = e / rate
        remaining = (horizon - t) + comp
        if h >= remaining:
            states.append(x)
            holds.append(remaining)
            break
        states.append(x)
        holds.append(h)
        y = h - comp
        tt = t + y
        comp = (tt - t) - y
        t = tt
        events += 1
        if events >= max_events:
            censored = True
            break
        state += GOLDEN
        x = jump(tau, n, x, msum, unif(mix64(state)))
    return np.array(states, dtype=np.int64), np.array(holds, dtype=np.float64), censored


cdef void* realloc_checked(void* p, size_t size) except NULL:
    cdef void* q = realloc(p, size)
    if q == NULL:
        raise MemoryError()
    return q


def window_batch(tau_in, int n, double eta, starts_in, keys_in, double theta, double inv_c,
                 flags_in, double alpha_n, double two_nb2, double pole, int64_t max_events):
    cdef const double[::1] tau = np.ascontiguousarray(tau_in, dtype=np.float64)
    cdef const uint8_t[::1] flags = np.ascontiguousarray(flags_in, dtype=np.uint8)
    cdef const int64_t[::1] starts = np.ascontiguousarray(starts_in, dtype=np.int64)
    cdef const uint64_t[::1] keys = np.ascontiguousarray(keys_in, dtype=np.uint64)
    cdef Py_ssize_t R = starts.shape[0]
    z_arr = np.zeros(R)
    sf_arr = np.zeros(R)
    ff_arr = np.zeros(R)
    fv_arr = np.full(R, -1, dtype=np.int64)
    ev_arr = np.zeros(R, dtype=np.int64)
    cen_arr = np.zeros(R, dtype=np.uint8)
    cdef double[::1] z = z_arr
    cdef double[::1] sum_f = sf_arr
    cdef double[::1] first_f = ff_arr
    cdef int64_t[::1] first_v = fv_arr
    cdef int64_t[::1] events_out = ev_arr
    cdef uint8_t[::1] censored = cen_arr
    cdef int64_t N = <int64_t>1 << n
    cdef int64_t cap = 1024
    cdef int64_t* slot = <int64_t*>malloc(N * sizeof(int64_t))
    cdef int64_t* vis = <int64_t*>malloc(cap * sizeof(int64_t))
    cdef double* loc = <double*>malloc(cap * sizeof(double))
    cdef int64_t nvis, first, events, x, k, s_idx
    cdef uint64_t state
    cdef double t, comp, clock, ccomp, msum, rate, w, e, h, remaining, seg, inc, cc, y, tt, s
    cdef bint last
    cdef Py_ssize_t r
    if slot == NULL or vis == NULL or loc == NULL:
        free(slot); free(vis); free(loc)
        raise MemoryError()
    for k in range(N):
        slot[k] = -1
    try:
        for r in range(R):
            state = keys[r]
            x = starts[r]
            t = 0.0
            comp = 0.0
            clock = 0.0
            ccomp = 0.0
            nvis = 0
            first = -1
            events = 0
            while True:
                msum = rates(tau, n, eta, EXPLORATION, x, &rate, &w)
                if (flags[x] & FLAG_TOP_ALONE) and first < 0:
                    first = x
                state += GOLDEN
                e = -log(open_unif(mix64(state)))
                h = e / rate
                remaining = (theta - t) + comp
                last = h >= remaining
                seg = remaining if last else h
                inc = w * seg - ccomp
                cc = clock + inc
                ccomp = (cc - clock) - inc
                clock = cc
                if flags[x] & FLAG_TOP:
                    s_idx = slot[x]
                    if s_idx < 0:
                        if nvis == cap:
                            cap *= 2
                            vis = <int64_t*>realloc_checked(vis, cap * sizeof(int64_t))
                            loc = <double*>realloc_checked(loc, cap * sizeof(double))
                        s_idx = nvis
                        slot[x] = s_idx
                        vis[s_idx] = x
                        loc[s_idx] = 0.0
                        nvis += 1
                    loc[s_idx] = loc[s_idx] + seg
                if last:
                    break
                y = h - comp
                tt = t + y
                comp = (tt - t) - y
                t = tt
                events += 1
                if events >= max_events:
                    censored[r] = 1
                    break
                state += GOLDEN
                x = jump(tau, n, x, msum, unif(mix64(state)))
            s = 0.0
            for k in range(nvis):
                s += f_val(loc[k], alpha_n, two_nb2, pole)
            z[r] = clock * inv_c
            sum_f[r] = s
            first_v[r] = first
            if first >= 0 and slot[first] >= 0:
                first_f[r] = f_val(loc[slot[first]], alpha_n, two_nb2, pole)
            events_out[r] = events
            for k in range(nvis):
                slot[vis[k]] = -1
    finally:
        free(slot)
        free(vis)
        free(loc)
    return z_arr, sf_arr, ff_arr, fv_arr, ev_arr, cen_arr


def blocked_clock_batch(tau_in, int n, double eta, starts_in, keys_in, double theta,
                        int64_t k, double inv_c, int64_t max_events):
    cdef const double[::1] tau = np.ascontiguousarray(tau_in, dtype=np.float64)
    cdef const int64_t[::1] starts = np.ascontiguousarray(starts_in, dtype=np.int64)
    cdef const uint64_t[::1] keys = np.ascontiguousarray(keys_in, dtype=np.uint64)
    cdef Py_ssize_t R = starts.shape[0]
    out_arr = np.zeros((R, k))
    ev_arr = np.zeros(R, dtype=np.int64)
    cen_arr = np.zeros(R, dtype=np.uint8)
    cdef double[:, ::1] out = out_arr
    cdef int64_t[::1] events_out = ev_arr
    cdef uint8_t[::1] censored = cen_arr
    cdef uint64_t state
    cdef int64_t x, j, events
    cdef double t, end, acc, msum, rate, w, e, h, part
    cdef Py_ssize_t r
    with nogil:
        for r in range(R):
            state = keys[r]
            x = starts[r]
            j = 0
            t = 0.0
            end = theta
            acc = 0.0
            events = 0
            while j < k:
                msum = rates(tau, n, eta, EXPLORATION, x, &rate, &w)
                state += GOLDEN
                e = -log(open_unif(mix64(state)))
                h = e / rate
                while j < k and t + h >= end:
                    part = end - t
                    acc += w * part
                    out[r, j] = acc * inv_c
                    acc = 0.0
                    h -= part
                    t = end
                    j += 1
                    end = theta * <double>(j + 1)
                if j >= k:
                    break
                acc += w * h
                t += h
                events += 1
                if events >= max_events:
                    censored[r] = 1
                    out[r, j] = acc * inv_c
                    break
                state += GOLDEN
                x = jump(tau, n, x, msum, unif(mix64(state)))
            events_out[r] = events
    return out_arr, ev_arr, cen_arr


def time_change_batch(tau_in, int n, double eta, starts_in, keys_in, targets_in,
                      int64_t max_events):
    cdef const double[::1] tau = np.ascontiguousarray(tau_in, dtype=np.float64)
    cdef const int64_t[::1] starts = np.ascontiguousarray(starts_in, dtype=np.int64)
    cdef const uint64_t[::1] keys = np.ascontiguousarray(keys_in, dtype=np.uint64)
    cdef const double[::1] targets = np.ascontiguousarray(targets_in, dtype=np.float64)
    cdef Py_ssize_t R = starts.shape[0]
    cdef Py_ssize_t m = targets.shape[0]
    out_arr = np.full((R, m), -1, dtype=np.int64)
    ev_arr = np.zeros(R, dtype=np.int64)
    cen_arr = np.zeros(R, dtype=np.uint8)
    cdef int64_t[:, ::1] out = out_arr
    cdef int64_t[::1] events_out = ev_arr
    cdef uint8_t[::1] censored = cen_arr
    cdef uint64_t state
    cdef int64_t x, events
    cdef Py_ssize_t idx, r
    cdef double clock, comp, msum, rate, w, e, inc, y, cc
    with nogil:
        for r in range(R):
            state = keys[r]
            x = starts[r]
            clock = 0.0
            comp = 0.0
            idx = 0
            events = 0
            while True:
                msum = rates(tau, n, eta, EXPLORATION, x, &rate, &w)
                state += GOLDEN
                e = -log(open_unif(mix64(state)))
                inc = w * (e / rate)
                y = inc - comp
                cc = clock + y
                while idx < m and targets[idx] < cc:
                    out[r, idx] = x
                    idx += 1
                if idx >= m:
                    break
                comp = (cc - clock) - y
                clock = cc
                events += 1
                if events >= max_events:
                    censored[r] = 1
                    break
                state += GOLDEN
                x = jump(tau, n, x, msum, unif(mix64(state)))
            events_out[r] = events
    return out_arr, ev_arr, cen_arr


def hitting_batch(tau_in, int n, double eta, int mode, starts_in, keys_in, target_in,
                  int64_t max_events):
    cdef const double[::1] tau = np.ascontiguousarray(tau_in, dtype=np.float64)
    cdef const int64_t[::1] starts = np.ascontiguousarray(starts_in, dtype=np.int64)
    cdef const uint64_t[::1] keys = np.ascontiguousarray(keys_in, dtype=np.uint64)
    cdef const uint8_t[::1] target = np.ascontiguousarray(target_in, dtype=np.uint8)
    cdef Py_ssize_t R = starts.shape[0]
    t_arr = np.zeros(R)
    ev_arr = np.zeros(R, dtype=np.int64)
    cen_arr = np.zeros(R, dtype=np.uint8)
    cdef double[::1] times = t_arr
    cdef int64_t[::1] events_out = ev_arr
    cdef uint8_t[::1] censored = cen_arr
    cdef uint64_t state
    cdef int64_t x, events
    cdef double t, comp, msum, rate, w, e, y, tt
    cdef Py_ssize_t r
    with nogil:
        for r in range(R):
            state = keys[r]
            x = starts[r]
            t = 0.0
            comp = 0.0
            events = 0
            while not target[x]:
                msum = rates(tau, n, eta, mode, x, &rate, &w)
                state += GOLDEN
                e = -log(open_unif(mix64(state)))
                y = e / rate - comp
                tt = t + y
                comp = (tt - t) - y
                t = tt
                events += 1
                if events >= max_events:
                    censored[r] = 1
                    break
                state += GOLDEN
                x = jump(tau, n, x, msum, unif(mix64(state)))
            times[r] = t
            events_out[r] = events
    return t_arr, ev_arr, cen_arr


cdef inline int popcount(int64_t v) nogil:
    cdef int c = 0
    while v:
        v &= v - 1
        c += 1
    return c


cdef int fill_cyclic(int64_t x, int64_t xp, int n, int i, int64_t* path) nogil:
    """Write the cyclic path from bit ``i`` into ``path``; return its edge count."""
    cdef int64_t diff = x ^ xp
    cdef int64_t v = x
    cdef int L = 0
    cdef int kk, b
    path[0] = x
    for kk in range(n):
        b = (i + kk) % n
        if (diff >> b) & 1:
            v ^= (<int64_t>1 << b)
            L += 1
            path[L] = v
    return L


cdef inline bint interior_good(const int64_t* path, int L, const uint8_t[::1] bad) nogil:
    cdef int kk
    for kk in range(1, L):
        if bad[path[kk]]:
            return False
    return True


cdef int select_path(int64_t x, int64_t xp, int n, const uint8_t[::1] bad, double far,
                     int64_t* path, int64_t* leg, int* rule) nogil:
    cdef int d = popcount(x ^ xp)
    cdef int i, j, L1, L2, d1, d2, a, b
    cdef int64_t wv, N = <int64_t>1 << n
    cdef bint clash
    if d >= far:
        for i in range(n):
            L1 = fill_cyclic(x, xp, n, i, path)
            if interior_good(path, L1, bad):
                rule[0] = 1
                return L1
        rule[0] = 0
        return fill_cyclic(x, xp, n, 0, path)
    for wv in range(N):
        if bad[wv]:
            continue
        d1 = popcount(x ^ wv)
        d2 = popcount(wv ^ xp)
        if d1 < far or d2 < far or d1 + d2 >= n:
            continue
        for i in range(n):
            L1 = fill_cyclic(x, wv, n, i, path)
            if not interior_good(path, L1, bad):
                continue
            for j in range(n):
                L2 = fill_cyclic(wv, xp, n, j, leg)
                if not interior_good(leg, L2, bad):
                    continue
                clash = False
                for b in range(1, L2 + 1):
                    for a in range(L1 + 1):
                        if leg[b] == path[a]:
                            clash = True
                            break
                    if clash:
                        break
                if clash:
                    continue
                for b in range(1, L2 + 1):
                    path[L1 + b] = leg[b]
                rule[0] = 2
                return L1 + L2
    rule[0] = 0
    return fill_cyclic(x, xp, n, 0, path)


def canonical_path(int64_t x, int64_t xp, int n, bad_in, double far):
    cdef const uint8_t[::1] bad = np.ascontiguousarray(bad_in, dtype=np.uint8)
    cdef int64_t path[130]
    cdef int64_t leg[66]
    cdef int rule = 0
    if n > 64:
        raise ValueError("n must be <= 64")
    cdef int L = select_path(x, xp, n, bad, far, path, leg, &rule)
    return [path[a] for a in range(L + 1)], rule


def path_congestion(bad_in, pi_in, int n, double far):
    cdef const uint8_t[::1] bad = np.ascontiguousarray(bad_in, dtype=np.uint8)
    cdef const double[::1] pi = np.ascontiguousarray(pi_in, dtype=np.float64)
    cdef int64_t N = <int64_t>1 << n
    loads_arr = np.zeros((N, n))
    rules_arr = np.zeros(3, dtype=np.int64)
    cdef double[:, ::1] loads = loads_arr
    cdef int64_t[::1] rules = rules_arr
    cdef int64_t path[130]
    cdef int64_t leg[66]
    cdef int64_t x, y, lo, bad_paths = 0, diffb
    cdef int L, rule, a, bit, max_len = 0
    cdef double wgt
    if n > 64:
        raise ValueError("n must be <= 64")
    with nogil:
        for x in range(N):
            for y in range(x + 1, N):
                L = select_path(x, y, n, bad, far, path, leg, &rule)
                rules[rule] += 1
                if not interior_good(path, L, bad):
                    bad_paths += 1
                if L > max_len:
                    max_len = L
                wgt = L * pi[x] * pi[y]
                for a in range(L):
                    lo = path[a] if path[a] < path[a + 1] else path[a + 1]
                    diffb = path[a] ^ path[a + 1]
                    bit = 0
                    while diffb > 1:
                        diffb >>= 1
                        bit += 1
                    loads[lo, bit] += wgt
    return loads_arr, bad_paths, rules_arr, max_len
