"""Pure-Python reference kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and the same floating-point operation order, so both consume the
same random words and return bit-identical results.
"""
from __future__ import annotations

import math

import numpy as np

from .._rng import GOLDEN, MASK64, mix64

METROPOLIS = 0
EXPLORATION = 1

FLAG_TOP = 1
FLAG_TOP_ALONE = 2

_INV53 = 1.0 / 9007199254740992.0


def _rates(tau, n, eta, mode, x):
    """Return ``(msum, total_rate, clock_weight)`` at ``x``."""
    tx = tau[x]
    msum = 0.0
    for i in range(n):
        ty = tau[x ^ (1 << i)]
        msum += ty if ty < tx else tx
    if mode == EXPLORATION:
        if tx >= eta:
            return msum, msum / n, tx
        return msum, eta * msum / (n * tx), eta
    return msum, msum / (n * tx), 1.0


def _jump(tau, n, x, msum, u):
    tx = tau[x]
    target = u * msum
    c = 0.0
    for i in range(n):
        ty = tau[x ^ (1 << i)]
        c += ty if ty < tx else tx
        if target < c:
            return x ^ (1 << i)
    return x ^ (1 << (n - 1))


def f_value(l, alpha_n, two_nb2, pole):
    if l <= 0.0:
        return 0.0
    L = math.log(l)
    if L >= pole:
        return math.inf
    return math.exp((alpha_n - L / two_nb2) * L) / (1.0 - L / pole)


def simulate_path(tau, n, eta, mode, start, horizon, key, max_events):
    """Full trajectory up to ``horizon``.

    Returns ``(states, holds, censored)``; the last hold is truncated at the
    horizon, so ``sum(holds) == horizon`` unless censored.
    """
    tau = np.asarray(tau, dtype=np.float64)
    state = int(key) & MASK64
    x = int(start)
    t = 0.0
    comp = 0.0
    states = []
    holds = []
    events = 0
    while True:
        msum, rate, _ = _rates(tau, n, eta, mode, x)
        state = (state + GOLDEN) & MASK64
        e = -math.log(((mix64(state) >> 11) + 0.5) * _INV53)
        h = e / rate
        remaining = (horizon - t) + comp
        if h >= remaining:
            states.append(x)
            holds.append(remaining)
            return np.array(states, dtype=np.int64), np.array(holds), False
        states.append(x)
        holds.append(h)
        y = h - comp
        tt = t + y
        comp = (tt - t) - y
        t = tt
        events += 1
        if events >= max_events:
            return np.array(states, dtype=np.int64), np.array(holds), True
        state = (state + GOLDEN) & MASK64
        x = _jump(tau, n, x, msum, (mix64(state) >> 11) * _INV53)


def window_batch(tau, n, eta, starts, keys, theta, inv_c, flags,
                 alpha_n, two_nb2, pole, max_events):
    """Exploration windows of length ``theta`` from the given starts.

    Returns ``(z, sum_f, first_f, first_vertex, events, censored)`` where
    ``z`` is the normalized clock over the window, ``sum_f`` the sum of F of
    the local times over flagged top vertices, and ``first_f`` F of the local
    time at the first top-alone vertex entered (``first_vertex = -1`` if none).
    """
    tau = np.asarray(tau, dtype=np.float64)
    flags = np.asarray(flags, dtype=np.uint8)
    R = len(starts)
    z = np.zeros(R)
    sum_f = np.zeros(R)
    first_f = np.zeros(R)
    first_v = np.full(R, -1, dtype=np.int64)
    events_out = np.zeros(R, dtype=np.int64)
    censored = np.zeros(R, dtype=np.uint8)
    for r in range(R):
        state = int(keys[r]) & MASK64
        x = int(starts[r])
        t = 0.0
        comp = 0.0
        clock = 0.0
        ccomp = 0.0
        local = {}
        first = -1
        events = 0
        while True:
            msum, rate, w = _rates(tau, n, eta, EXPLORATION, x)
            if flags[x] & FLAG_TOP_ALONE and first < 0:
                first = x
            state = (state + GOLDEN) & MASK64
            e = -math.log(((mix64(state) >> 11) + 0.5) * _INV53)
            h = e / rate
            remaining = (theta - t) + comp
            last = h >= remaining
            seg = remaining if last else h
            inc = w * seg - ccomp
            cc = clock + inc
            ccomp = (cc - clock) - inc
            clock = cc
            if flags[x] & FLAG_TOP:
                local[x] = local.get(x, 0.0) + seg
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
            state = (state + GOLDEN) & MASK64
            x = _jump(tau, n, x, msum, (mix64(state) >> 11) * _INV53)
        s = 0.0
        for v in local:
            s += f_value(local[v], alpha_n, two_nb2, pole)
        z[r] = clock * inv_c
        sum_f[r] = s
        first_v[r] = first
        if first >= 0 and first in local:
            first_f[r] = f_value(local[first], alpha_n, two_nb2, pole)
        events_out[r] = events
    return z, sum_f, first_f, first_v, events_out, censored


def blocked_clock_batch(tau, n, eta, starts, keys, theta, k, inv_c, max_events):
    """Clock increments over ``k`` consecutive blocks of length ``theta``.

    Returns ``(increments[R, k], events, censored)``.
    """
    tau = np.asarray(tau, dtype=np.float64)
    R = len(starts)
    out = np.zeros((R, k))
    events_out = np.zeros(R, dtype=np.int64)
    censored = np.zeros(R, dtype=np.uint8)
    for r in range(R):
        state = int(keys[r]) & MASK64
        x = int(starts[r])
        j = 0
        t = 0.0
        end = theta
        acc = 0.0
        events = 0
        while j < k:
            msum, rate, w = _rates(tau, n, eta, EXPLORATION, x)
            state = (state + GOLDEN) & MASK64
            e = -math.log(((mix64(state) >> 11) + 0.5) * _INV53)
            h = e / rate
            while j < k and t + h >= end:
                part = end - t
                acc += w * part
                out[r, j] = acc * inv_c
                acc = 0.0
                h -= part
                t = end
                j += 1
                end = theta * (j + 1)
            if j >= k:
                break
            acc += w * h
            t += h
            events += 1
            if events >= max_events:
                censored[r] = 1
                out[r, j] = acc * inv_c
                break
            state = (state + GOLDEN) & MASK64
            x = _jump(tau, n, x, msum, (mix64(state) >> 11) * _INV53)
        events_out[r] = events
    return out, events_out, censored


def time_change_batch(tau, n, eta, starts, keys, targets, max_events):
    """States of the exploration chain at first passage of its clock over ``targets``.

    ``targets`` must be sorted.  Returns ``(states[R, m], events, censored)``;
    censored replicas carry ``-1`` for the targets never reached.
    """
    tau = np.asarray(tau, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    R = len(starts)
    m = len(targets)
    out = np.full((R, m), -1, dtype=np.int64)
    events_out = np.zeros(R, dtype=np.int64)
    censored = np.zeros(R, dtype=np.uint8)
    for r in range(R):
        state = int(keys[r]) & MASK64
        x = int(starts[r])
        clock = 0.0
        comp = 0.0
        idx = 0
        events = 0
        while True:
            msum, rate, w = _rates(tau, n, eta, EXPLORATION, x)
            state = (state + GOLDEN) & MASK64
            e = -math.log(((mix64(state) >> 11) + 0.5) * _INV53)
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
            state = (state + GOLDEN) & MASK64
            x = _jump(tau, n, x, msum, (mix64(state) >> 11) * _INV53)
        events_out[r] = events
    return out, events_out, censored


def hitting_batch(tau, n, eta, mode, starts, keys, target_mask, max_events):
    """First entrance times into ``target_mask``; ``(times, events, censored)``."""
    tau = np.asarray(tau, dtype=np.float64)
    target_mask = np.asarray(target_mask, dtype=np.uint8)
    R = len(starts)
    times = np.zeros(R)
    events_out = np.zeros(R, dtype=np.int64)
    censored = np.zeros(R, dtype=np.uint8)
    for r in range(R):
        state = int(keys[r]) & MASK64
        x = int(starts[r])
        t = 0.0
        comp = 0.0
        events = 0
        while not target_mask[x]:
            msum, rate, _ = _rates(tau, n, eta, mode, x)
            state = (state + GOLDEN) & MASK64
            e = -math.log(((mix64(state) >> 11) + 0.5) * _INV53)
            y = e / rate - comp
            tt = t + y
            comp = (tt - t) - y
            t = tt
            events += 1
            if events >= max_events:
                censored[r] = 1
                break
            state = (state + GOLDEN) & MASK64
            x = _jump(tau, n, x, msum, (mix64(state) >> 11) * _INV53)
        times[r] = t
        events_out[r] = events
    return times, events_out, censored


def cyclic_path(x, xp, n, i):
    """Vertices of the path flipping the disagreeing bits cyclically from bit ``i``."""
    diff = x ^ xp
    path = [x]
    v = x
    for k in range(n):
        b = (i + k) % n
        if diff >> b & 1:
            v ^= 1 << b
            path.append(v)
    return path


def _interior_good(path, bad):
    for v in path[1:-1]:
        if bad[v]:
            return False
    return True


def _first_good_cyclic(x, xp, n, bad):
    for i in range(n):
        p = cyclic_path(x, xp, n, i)
        if _interior_good(p, bad):
            return p
    return None


def select_path(x, xp, n, bad, far):
    """Canonical path from ``x`` to ``xp`` and the rule that produced it.

    Rule codes: 1 = first good cyclic path, 2 = two-leg path through a
    waypoint, 0 = fallback to the ascending cyclic path.
    """
    d = bin(x ^ xp).count("1")
    if d >= far:
        p = _first_good_cyclic(x, xp, n, bad)
        if p is not None:
            return p, 1
        return cyclic_path(x, xp, n, 0), 0
    for w in range(1 << n):
        if bad[w]:
            continue
        d1 = bin(x ^ w).count("1")
        d2 = bin(w ^ xp).count("1")
        if d1 < far or d2 < far or d1 + d2 >= n:
            continue
        for i in range(n):
            p1 = cyclic_path(x, w, n, i)
            if not _interior_good(p1, bad):
                continue
            seen = set(p1)
            for j in range(n):
                p2 = cyclic_path(w, xp, n, j)
                if not _interior_good(p2, bad):
                    continue
                if any(v in seen for v in p2[1:]):
                    continue
                return p1 + p2[1:], 2
    return cyclic_path(x, xp, n, 0), 0


def path_congestion(bad, pi, n, far):
    """Edge loads ``sum |gamma| pi(x) pi(y)`` over the canonical family.

    One path per unordered pair ``x < y``, directed from ``x`` to ``y``.
    Edge ``{v, v ^ (1 << b)}`` is stored at ``[min(v, v ^ (1 << b)), b]``.
    Returns ``(loads, bad_paths, rule_counts[3], max_length)``.
    """
    bad = np.asarray(bad, dtype=np.uint8)
    pi = np.asarray(pi, dtype=np.float64)
    N = 1 << n
    loads = np.zeros((N, n))
    rules = np.zeros(3, dtype=np.int64)
    bad_paths = 0
    max_len = 0
    for x in range(N):
        for y in range(x + 1, N):
            p, rule = select_path(x, y, n, bad, far)
            rules[rule] += 1
            if not _interior_good(p, bad):
                bad_paths += 1
            L = len(p) - 1
            max_len = max(max_len, L)
            wgt = L * pi[x] * pi[y]
            for a, b in zip(p[:-1], p[1:]):
                lo = a if a < b else b
                loads[lo, (a ^ b).bit_length() - 1] += wgt
    return loads, bad_paths, rules, max_len


canonical_path = select_path
