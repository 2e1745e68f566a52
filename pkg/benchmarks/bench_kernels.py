"""Compare the compiled kernels with the pure-Python reference.

Both backends get identical inputs; outputs are checked for bit equality
before timings are reported.

    python benchmarks/bench_kernels.py --n 10 --replicas 2000
"""
import argparse
import time

import numpy as np

from remlab import kernels
from remlab._rng import replica_keys
from remlab.environment import Environment
from remlab.kernels import python_backend
from remlab.scales import ScaleSet, beta_c, f_params


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _equal(a, b):
    if isinstance(a, tuple):
        return all(_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases(n, replicas):
    eps = 0.4
    s = ScaleSet.build(n, 1.5 * beta_c(eps), eps, theta_n=4.0)
    env = Environment(n, s.beta, seed=0)
    tau = np.ascontiguousarray(env.taus)
    keys = replica_keys(0, "bench", replicas)
    starts = (np.arange(replicas, dtype=np.int64) * 7919) % env.size
    flags = np.zeros(env.size, dtype=np.uint8)
    flags[np.argsort(tau)[-8:]] = kernels.FLAG_TOP
    targets = np.array([s.c_n, 2 * s.c_n])
    pn = min(n, 8)
    benv = Environment(pn, 1.0, seed=1)
    bad = (benv.taus < np.quantile(benv.taus, 0.1)).astype(np.uint8)
    pi = benv.taus / benv.taus.sum()
    return {
        "simulate_path": lambda b: b.simulate_path(tau, n, s.eta, kernels.EXPLORATION, 0,
                                                   2000.0, int(keys[0]), 10**9),
        "window_batch": lambda b: b.window_batch(tau, n, s.eta, starts, keys, s.theta_n,
                                                 1 / s.c_n, flags, *f_params(s), 10**9),
        "time_change_batch": lambda b: b.time_change_batch(tau, n, s.eta, starts[:200],
                                                           keys[:200], targets, 10**9),
        f"path_congestion(n={pn})": lambda b: b.path_congestion(bad, pi, pn, pn / np.log(pn)),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--replicas", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension not built; nothing to compare")
    print(f"{'kernel':<26}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}  identical")
    for name, fn in cases(args.n, args.replicas).items():
        tp, op = _time(lambda: fn(python_backend), 1)
        tc, oc = _time(lambda: fn(kernels.compiled_backend), args.repeat)
        print(f"{name:<26}{tp:>12.4f}{tc:>14.5f}{tp / tc:>10.0f}  {_equal(op, oc)}")


if __name__ == "__main__":
    main()
