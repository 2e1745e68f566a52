"""Estimators for the block-clock convergence conditions and their limits.

Every estimator works on windows of length ``theta_n`` of the exploration
chain.  The normalized clock of one window is

    Z = c_n^{-1} int_0^theta max(eta, tau(Y(s))) ds,

and tails are multiplied by ``k_n(t) = floor(a_n t / theta_n)`` where
``a_n = 2^(eps n) / b_n``, so ``b_n`` has to be estimated first.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gamma

from . import kernels
from ._rng import replica_keys
from .dynamics import (DEFAULT_MAX_EVENTS, PiSampler, RateModel, correlation, run_replicas,
                       uniform_starts, wilson_interval)
from .errors import DomainError, ResourceError
from .scales import SIGN_NOTE, ScaleSet, f_params
from . import spectral

log = logging.getLogger(__name__)

DEFAULT_U_GRID = tuple(np.geomspace(0.25, 8.0, 13))
DEFAULT_LAMBDAS = (0.5, 1.0, 2.0)


def arcsine_cdf(alpha: float, w: float) -> float:
    """Generalized arcsine distribution function ``I_w(alpha, 1 - alpha)``."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if not 0 <= w <= 1:
        raise DomainError("w must lie in [0, 1]")
    return float(betainc(alpha, 1 - alpha, w))


def isotonic_nonincreasing(y, weights=None) -> np.ndarray:
    """Least-squares nonincreasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    vals, wts, lens = [], [], []
    for v, wt in zip(y, w):
        vals.append(v)
        wts.append(wt)
        lens.append(1)
        while len(vals) > 1 and vals[-2] < vals[-1]:
            tw = wts[-2] + wts[-1]
            vals[-2] = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / tw
            wts[-2] = tw
            lens[-2] += lens[-1]
            del vals[-1], wts[-1], lens[-1]
    return np.repeat(vals, lens)


@dataclass
class TailEstimate:
    """Estimates on a grid with raw and monotone-cleaned values."""

    kind: str
    grid: np.ndarray
    raw: np.ndarray
    values: np.ndarray
    ci_half_widths: np.ndarray
    replicas: int
    t: float | None = None
    scale: float = 1.0

    def rows(self):
        for g, r, v, c in zip(self.grid, self.raw, self.values, self.ci_half_widths):
            yield {"grid": float(g), "raw": float(r), "value": float(v), "ci": float(c),
                   "replicas": self.replicas}

    def max_raw_violation(self) -> float:
        """Largest upward step of the raw values, in units of the local CI."""
        d = np.diff(self.raw)
        ci = np.maximum(self.ci_half_widths[1:] + self.ci_half_widths[:-1], 1e-300)
        return float(np.max(d / ci, initial=0.0))


# --------------------------------------------------------------------------- windows


@dataclass
class WindowSample:
    """Windows of length ``theta`` from a batch of starts."""

    z: np.ndarray
    sum_f: np.ndarray
    first_f: np.ndarray
    first_vertex: np.ndarray
    events: np.ndarray
    starts: np.ndarray = field(repr=False)
    theta: float = 1.0

    @property
    def replicas(self) -> int:
        return len(self.z)


def _flags(model: RateModel, top) -> np.ndarray:
    if top is None:
        return np.zeros(model.env.size, dtype=np.uint8)
    return top.flags(model.env.size)


def _starts(model: RateModel, keys, initial) -> np.ndarray:
    if isinstance(initial, np.ndarray):
        return np.asarray(initial, dtype=np.int64)
    if initial == "pi":
        return PiSampler(model).from_keys(keys)
    if initial == "uniform":
        return uniform_starts(keys, model.n)
    raise DomainError("initial must be 'pi', 'uniform' or an array of starts")


def sample_windows(model: RateModel, scales: ScaleSet, replicas: int, seed: int, label: str,
                   initial="pi", top=None, max_events: int = DEFAULT_MAX_EVENTS,
                   threads: int | None = None) -> WindowSample:
    """Run ``replicas`` exploration windows of length ``scales.theta_n``."""
    expl = model.with_mode("exploration")
    keys = replica_keys(seed, label, replicas)
    starts = _starts(expl, keys, initial)
    tau = np.ascontiguousarray(expl.taus)
    flags = _flags(expl, top)
    a_n, two_nb2, pole = f_params(scales)
    theta = float(scales.theta_n)

    def fn(st, k):
        return kernels.window_batch(tau, expl.n, expl.eta, st, k, theta, 1.0 / scales.c_n,
                                    flags, a_n, two_nb2, pole, int(max_events))

    z, sf, ff, fv, ev, cens = run_replicas(fn, starts, keys, threads=threads)
    if np.any(cens):
        raise ResourceError(f"{int(np.sum(cens))} windows hit the event ceiling",
                            WindowSample(z, sf, ff, fv, ev, starts, theta))
    return WindowSample(z, sf, ff, fv, ev, starts, theta)


def _k_n(scales: ScaleSet, t: float) -> int:
    if scales.a_n is None:
        raise DomainError("a_n unavailable: estimate b_n first")
    return scales.k_n(t)


def _tail(kind, grid, hits, R, scale, t):
    p = hits / R
    ci = np.array([wilson_interval(int(h), R) for h in hits])
    half = scale * (ci[:, 1] - ci[:, 0]) / 2
    raw = scale * p
    return TailEstimate(kind, np.asarray(grid, dtype=float), raw, isotonic_nonincreasing(raw),
                        half, R, t, scale)


def nu_estimator(model: RateModel, scales: ScaleSet, t: float, u_grid=DEFAULT_U_GRID,
                 replicas: int = 10_000, seed: int = 0, sample: WindowSample | None = None,
                 threads: int | None = None) -> TailEstimate:
    """``k_n(t) P_pi(Z > u)`` from windows started at exact invariant draws."""
    k = _k_n(scales, t)
    if sample is None:
        sample = sample_windows(model, scales, replicas, seed, "nu", threads=threads)
    u = np.sort(np.asarray(u_grid, dtype=float))
    hits = np.array([np.count_nonzero(sample.z > x) for x in u])
    return _tail("nu", u, hits, sample.replicas, k, t)


def sigma_estimator(model: RateModel, scales: ScaleSet, t: float, u_grid=DEFAULT_U_GRID,
                    replicas: int = 10_000, seed: int = 0, first: WindowSample | None = None,
                    threads: int | None = None) -> TailEstimate:
    """``k_n(t) sum_y pi(y) Q^u(y)^2`` by paired windows.

    Two windows are run from the same invariant draw ``y`` with independent
    keys; given ``y`` the two indicators are independent with mean ``Q^u(y)``,
    so the product is unbiased for ``Q^u(y)^2``.
    """
    k = _k_n(scales, t)
    if first is None:
        first = sample_windows(model, scales, replicas, seed, "nu", threads=threads)
    second = sample_windows(model, scales, first.replicas, seed, "sigma-pair",
                            initial=first.starts, threads=threads)
    u = np.sort(np.asarray(u_grid, dtype=float))
    hits = np.array([np.count_nonzero((first.z > x) & (second.z > x)) for x in u])
    return _tail("sigma", u, hits, first.replicas, k, t)


def truncated_mean(model: RateModel, scales: ScaleSet, t: float, eps_grid,
                   replicas: int = 10_000, seed: int = 0, sample: WindowSample | None = None,
                   threads: int | None = None) -> TailEstimate:
    """``k_n(t) E_pi[Z; Z <= eps]`` for each ``eps`` (nondecreasing in ``eps``)."""
    k = _k_n(scales, t)
    if sample is None:
        sample = sample_windows(model, scales, replicas, seed, "nu", threads=threads)
    e = np.sort(np.asarray(eps_grid, dtype=float))
    R = sample.replicas
    means, half = [], []
    for x in e:
        v = np.where(sample.z <= x, sample.z, 0.0)
        means.append(k * v.mean())
        half.append(1.96 * k * v.std(ddof=1) / math.sqrt(R) if R > 1 else math.inf)
    raw = np.array(means)
    # monotone in eps by construction on a shared sample
    return TailEstimate("truncated_mean", e, raw, np.maximum.accumulate(raw), np.array(half),
                        R, t, k)


def a0_check(model: RateModel, scales: ScaleSet, u_grid=DEFAULT_U_GRID,
             replicas: int = 10_000, seed: int = 0, threads: int | None = None) -> TailEstimate:
    """``P_uniform(Z > u)`` for the first window (no ``k_n`` factor)."""
    sample = sample_windows(model, scales, replicas, seed, "a0", initial="uniform",
                            threads=threads)
    u = np.sort(np.asarray(u_grid, dtype=float))
    hits = np.array([np.count_nonzero(sample.z > x) for x in u])
    return _tail("a0", u, hits, sample.replicas, 1.0, None)


def loglog_slope(est: TailEstimate, lo: float = 0.5, hi: float = 4.0) -> float:
    """Least-squares slope of ``log value`` against ``log u`` on ``[lo, hi]``."""
    m = (est.grid >= lo) & (est.grid <= hi) & (est.raw > 0)
    if m.sum() < 2:
        raise DomainError("not enough positive points for a slope")
    return float(np.polyfit(np.log(est.grid[m]), np.log(est.raw[m]), 1)[0])


# --------------------------------------------------------------------------- b_n


@dataclass
class BnEstimate:
    b_n: float
    b_n_circ: float
    method: str
    se: tuple = (math.nan, math.nan)
    visits: int = 0
    warnings: list = field(default_factory=list)

    def ordered(self) -> bool:
        return self.b_n >= self.b_n_circ >= 0


def bn_estimator(model: RateModel, scales: ScaleSet, top, replicas: int = 10_000,
                 seed: int = 0, method: str = "monte_carlo", sample: WindowSample | None = None,
                 threads: int | None = None) -> BnEstimate:
    """``b_n`` and its first-entrance version ``b_n_circ``.

    ``monte_carlo`` averages the F-sums of invariant-start windows;
    ``exact_small_n`` evaluates the same expectations by uniformization.
    """
    expl = model.with_mode("exploration")
    pi = expl.stationary()
    theta = float(scales.theta_n)
    pT = float(pi[top.t_n].sum())
    pC = float(pi[top.t_circ].sum())
    if pT == 0:
        raise DomainError("top set is empty")
    if method == "monte_carlo":
        if sample is None:
            sample = sample_windows(expl, scales, replicas, seed, "bn", top=top, threads=threads)
        R = sample.replicas
        b = float(sample.sum_f.mean()) / (theta * pT)
        se_b = float(sample.sum_f.std(ddof=1)) / math.sqrt(R) / (theta * pT)
        visits = int(np.count_nonzero(sample.sum_f))
        if pC > 0:
            bc = float(sample.first_f.mean()) / (theta * pC)
            se_c = float(sample.first_f.std(ddof=1)) / math.sqrt(R) / (theta * pC)
        else:
            bc, se_c = 0.0, 0.0
        warn = []
        if visits == 0:
            warn.append("no window visited the top set; estimate is degenerate")
            log.warning(warn[-1])
        return BnEstimate(b, bc, method, (se_b, se_c), visits, warn)
    if method == "exact_small_n":
        if expl.n > 12:
            raise DomainError("exact method limited to n <= 12")
        gen = spectral.build_generator(expl)
        g = spectral.f_functional(*f_params(scales))
        tot = sum(spectral.local_time_functional(gen, int(x), theta, g) for x in top.t_n)
        circ = sum(spectral.local_time_functional(gen, int(x), theta, g, first_set=top.t_circ)
                   for x in top.t_circ)
        b = float(tot) / (theta * pT)
        bc = float(circ) / (theta * pC) if pC > 0 else 0.0
        return BnEstimate(b, bc, method, (0.0, 0.0))
    raise DomainError(f"unknown method {method!r}")


def bn_corridor(scales: ScaleSet, b_n: float, c_pm: float = 6.0) -> dict:
    """Check ``|ln b_n| / ln r_star <= 1 + alpha_n + c_pm ln n / ln r_star``."""
    lr = scales.log_r_star
    slack = c_pm * math.log(scales.n) / lr
    ratio = math.log(b_n) / lr
    lim = 1 + scales.alpha_n + slack
    return {"ratio": ratio, "lower": -lim, "upper": lim, "slack": slack,
            "pass": bool(-lim <= ratio <= lim)}


# --------------------------------------------------------------------------- limits


def laplace_target(alpha: float, t: float, lam) -> np.ndarray:
    """``exp(-t Gamma(1 - alpha) lam^alpha)``: the zero-drift subordinator with tail ``u^-alpha``."""
    lam = np.asarray(lam, dtype=float)
    return np.exp(-t * gamma(1 - alpha) * lam**alpha)


def blocked_sums(model: RateModel, scales: ScaleSet, t: float, replicas: int, seed: int,
                 initial="uniform", max_events: int = DEFAULT_MAX_EVENTS,
                 threads: int | None = None) -> np.ndarray:
    """Samples of ``S^b(t) = Z_1 + ... + Z_{k_n(t)}``."""
    k = _k_n(scales, t)
    expl = model.with_mode("exploration")
    keys = replica_keys(seed, f"blocked:{t!r}", replicas)
    starts = _starts(expl, keys, initial)
    if k == 0:
        return np.zeros(replicas)
    tau = np.ascontiguousarray(expl.taus)

    def fn(st, kk):
        return kernels.blocked_clock_batch(tau, expl.n, expl.eta, st, kk, float(scales.theta_n),
                                           k, 1.0 / scales.c_n, int(max_events))

    inc, _, cens = run_replicas(fn, starts, keys, threads=threads)
    if np.any(cens):
        raise ResourceError("blocked clock hit the event ceiling", inc)
    return inc.sum(axis=1)


def subordinator_marginal_check(samples, alpha: float, t: float = 1.0,
                                lambda_grid=DEFAULT_LAMBDAS, bootstrap: int = 500,
                                seed: int = 0, min_samples: int = 1000) -> dict:
    """Empirical Laplace transform of ``S^b(t)`` against the stable target."""
    s = np.asarray(samples, dtype=float)
    lam = np.asarray(lambda_grid, dtype=float)
    warn = []
    if len(s) < min_samples:
        warn.append(f"only {len(s)} samples; low statistical power")
        log.warning(warn[-1])
    emp = np.exp(-np.outer(lam, s)).mean(axis=1)
    tgt = laplace_target(alpha, t, lam)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(s), size=(bootstrap, len(s)))
    boot = np.stack([np.exp(-l * s[idx]).mean(axis=1) for l in lam], axis=1)
    lo, hi = np.percentile(boot, [2.5, 97.5], axis=0)
    return {"lambda": lam.tolist(), "empirical": emp.tolist(), "target": tgt.tolist(),
            "deviation": np.abs(emp - tgt).tolist(), "ci_low": lo.tolist(),
            "ci_high": hi.tolist(), "samples": int(len(s)), "warnings": warn}


def aging_report(models, c_n: float, alpha: float, pairs=((1.0, 1.0), (2.0, 2.0)),
                 replicas: int = 10_000, seed: int = 0, threads: int | None = None) -> dict:
    """Two-time correlations against the arcsine limit.

    ``models`` is one rate model or a panel of them (independent
    environments); panel values are averaged and their spread gives the
    standard error.
    """
    if isinstance(models, RateModel):
        models = [models]
    rows = []
    for t, s in pairs:
        est = [correlation(m, c_n, t, s, replicas, seed, label=f"aging:{i}", threads=threads)
               for i, m in enumerate(models)]
        vals = np.array([e.estimate for e in est])
        if len(vals) > 1:
            se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
        else:
            p, done = vals[0], est[0].completed
            se = math.sqrt(p * (1 - p) / done) if done else math.nan
        limit = arcsine_cdf(alpha, t / (t + s))
        rows.append({"t": t, "s": s, "estimate": float(vals.mean()), "se": se,
                     "per_environment": vals.tolist(), "limit": limit,
                     "deviation": abs(float(vals.mean()) - limit),
                     "censored": int(sum(e.censored for e in est))})
    ratio = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            a, b = rows[i], rows[j]
            if abs(a["t"] / (a["t"] + a["s"]) - b["t"] / (b["t"] + b["s"])) > 1e-12:
                continue
            joint = 1.96 * math.hypot(a["se"], b["se"])
            diff = abs(a["estimate"] - b["estimate"])
            ratio.append({"pairs": [(a["t"], a["s"]), (b["t"], b["s"])], "difference": diff,
                          "joint_ci": joint, "pass": bool(diff <= joint)})
    return {"alpha": alpha, "rows": rows, "ratio_consistency": ratio, "note": SIGN_NOTE}


def trend_decreasing(values) -> bool:
    """Strictly decreasing sequence."""
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))
