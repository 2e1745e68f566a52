"""Metropolis and exploration chains on the hypercube.

The exploration chain speeds the Metropolis chain up by ``max(eta, tau(x))``
at ``x``; both share their jump law.  Its clock ``S(t) = int max(eta, tau(Y))``
time-changes it back into the Metropolis chain, which is how the Metropolis
chain is evaluated at long times.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from . import kernels
from ._rng import mix64_array, replica_keys
from .environment import Environment, neighbors
from .errors import DomainError, ResourceError

DEFAULT_MAX_EVENTS = 10**9
_START_SALT = np.uint64(0x2545F4914F6CDD1D)
_PI_SALT = np.uint64(0x6C8E9CF570932BD5)
MODES = ("metropolis", "exploration")


def default_threads() -> int:
    return max(1, int(os.environ.get("REM_LAB_THREADS", "1")))


class RateModel:
    """Transition rates of one chain over a fixed environment.

    Parameters
    ----------
    env : Environment
    eta : float
        Lower cap of the speed-up factor; ``1 / r_star`` in the aging setting.
    mode : {"metropolis", "exploration"}
    """

    def __init__(self, env: Environment, eta: float, mode: str = "exploration"):
        if mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if not eta > 0:
            raise DomainError("eta must be positive")
        self.env = env
        self.eta = float(eta)
        self.mode = mode
        self.n = env.n

    @property
    def code(self) -> int:
        return kernels.EXPLORATION if self.mode == "exploration" else kernels.METROPOLIS

    @property
    def taus(self) -> np.ndarray:
        return self.env.taus

    def with_mode(self, mode: str) -> "RateModel":
        return RateModel(self.env, self.eta, mode)

    def speedup(self, x):
        """``max(eta, tau(x))`` for exploration, 1 for Metropolis."""
        if self.mode == "metropolis":
            return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0
        return np.maximum(self.eta, self.env.tau(x))

    def rate(self, x: int, y: int) -> float:
        if bin(x ^ y).count("1") != 1:
            return 0.0
        dh = self.env.hamiltonian(y) - self.env.hamiltonian(x)
        lam = math.exp(-self.env.beta * max(dh, 0.0)) / self.n
        return float(self.speedup(x)) * lam

    def rates_from(self, x: int) -> np.ndarray:
        """Rates to ``neighbors(x)`` in canonical order."""
        nb = np.array(neighbors(x, self.n))
        dh = self.env.hamiltonian(nb) - self.env.hamiltonian(x)
        lam = np.exp(-self.env.beta * np.maximum(dh, 0.0)) / self.n
        return float(self.speedup(x)) * lam

    def total_rate(self, x: int) -> float:
        total = float(np.sum(self.rates_from(x)))
        assert total > 0, "total rate must be positive"
        return total

    def jump_distribution(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        """``(neighbors, probabilities)`` of the embedded jump chain at ``x``."""
        r = self.rates_from(x)
        return np.array(neighbors(x, self.n)), r / r.sum()

    def stationary_weights(self) -> np.ndarray:
        """Unnormalized invariant weights: ``tau`` or ``min(1, tau / eta)``."""
        tau = self.taus
        if self.mode == "metropolis":
            return tau.copy()
        return np.where(tau > self.eta, 1.0, tau / self.eta)

    def stationary(self) -> np.ndarray:
        w = self.stationary_weights()
        return w / w.sum()

    def edge_rates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All directed edges ``(x, y, rate)`` with ``y = x ^ (1 << i)``."""
        N = self.env.size
        h = self.env.energies()
        x = np.repeat(np.arange(N), self.n)
        y = x ^ np.tile(1 << np.arange(self.n), N)
        lam = np.exp(-self.env.beta * np.maximum(h[y] - h[x], 0.0)) / self.n
        if self.mode == "exploration":
            lam = np.maximum(self.eta, self.taus[x]) * lam
        return x, y, lam

    def detailed_balance_residual(self) -> float:
        """Max relative gap of ``w(x) rate(x, y)`` against ``w(y) rate(y, x)``."""
        x, y, lam = self.edge_rates()
        w = self.stationary_weights()
        flow = w[x] * lam
        N = self.env.size
        back = flow.reshape(N, self.n)[y, np.tile(np.arange(self.n), N)]
        return float(np.max(np.abs(flow - back) / np.maximum(flow, back)))


@dataclass
class Trajectory:
    states: np.ndarray
    holds: np.ndarray
    t_end: float
    weights: np.ndarray
    censored: bool = False

    @property
    def events(self) -> int:
        return max(len(self.states) - 1, 0)

    @property
    def local_times(self) -> dict:
        """Time spent at each visited vertex."""
        lt: dict = {}
        for x, h in zip(self.states.tolist(), self.holds.tolist()):
            lt[x] = lt.get(x, 0.0) + h
        return lt

    @property
    def clock_increments(self) -> np.ndarray:
        return self.holds * self.weights

    def clock(self, t):
        """``int_0^t max(eta, tau(Y(s))) ds``, piecewise linear in ``t``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_end * (1 + 1e-12)):
            raise DomainError("clock queried outside the simulated interval")
        ends = np.cumsum(self.holds)
        cum = np.concatenate([[0.0], np.cumsum(self.clock_increments)])
        starts = ends - self.holds
        j = np.clip(np.searchsorted(ends, t, side="right"), 0, len(self.holds) - 1)
        out = cum[j] + self.weights[j] * (t - starts[j])
        return float(out) if out.ndim == 0 else out

    def clock_samples(self, times) -> list[tuple[float, float]]:
        return [(float(t), float(self.clock(t))) for t in times]


@dataclass
class BlockedClock:
    theta: float
    increments: np.ndarray
    c_n: float
    extra: dict = field(default_factory=dict)

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.increments)


def _checked_tau(model: RateModel) -> np.ndarray:
    return np.ascontiguousarray(model.taus)


def simulate(model: RateModel, start: int, horizon: float, key: int,
             max_events: int = DEFAULT_MAX_EVENTS) -> Trajectory:
    """Event-driven path of the chain started at ``start`` up to ``horizon``.

    Raises ``ResourceError`` (with the partial trajectory attached) when the
    event ceiling is hit first.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if not 0 <= start < model.env.size:
        raise DomainError("start vertex out of range")
    tau = _checked_tau(model)
    states, holds, censored = kernels.simulate_path(
        tau, model.n, model.eta, model.code, int(start), float(horizon),
        int(key), int(max_events))
    w = model.speedup(states) if model.mode == "exploration" else np.ones(len(states))
    traj = Trajectory(states, holds, float(holds.sum()) if censored else float(horizon),
                      np.asarray(w, dtype=float), bool(censored))
    if censored:
        raise ResourceError(f"event ceiling {max_events} reached before the horizon", traj)
    return traj


def blocked_clock(traj: Trajectory, theta: float, c_n: float, k: int | None = None) -> BlockedClock:
    """Increments ``Z_i = (S(theta i) - S(theta (i-1))) / c_n`` for ``i = 1..k``."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    kmax = math.floor(traj.t_end / theta * (1 + 1e-12))
    if k is None:
        k = kmax
    if k > kmax:
        raise DomainError(f"trajectory covers {kmax} blocks, {k} requested")
    grid = theta * np.arange(k + 1)
    grid[-1] = min(grid[-1], traj.t_end)
    s = traj.clock(grid)
    return BlockedClock(theta, np.diff(s) / c_n, c_n)


def _chunks(total: int, threads: int):
    size = max(1, math.ceil(total / threads))
    return [(a, min(total, a + size)) for a in range(0, total, size)]


def run_replicas(fn, starts, keys, *args, threads: int | None = None):
    """Run a batch kernel over replica chunks and concatenate its outputs.

    Replica results depend only on their own key, so the split is invisible.
    """
    threads = threads or default_threads()
    starts = np.asarray(starts, dtype=np.int64)
    keys = np.asarray(keys, dtype=np.uint64)
    if threads == 1 or len(starts) < 2:
        return fn(starts, keys, *args)
    parts = _chunks(len(starts), threads)
    with ThreadPoolExecutor(threads) as ex:
        res = list(ex.map(lambda ab: fn(starts[ab[0]:ab[1]], keys[ab[0]:ab[1]], *args), parts))
    return tuple(np.concatenate([r[i] for r in res]) for i in range(len(res[0])))


class PiSampler:
    """Exact draws from the invariant law of a rate model via a CDF table."""

    def __init__(self, model: RateModel):
        w = model.stationary_weights()
        self.z = float(w.sum())
        cdf = np.cumsum(w)
        self.cdf = cdf / cdf[-1]
        self.size = len(w)

    def from_uniforms(self, u) -> np.ndarray:
        idx = np.searchsorted(self.cdf, np.asarray(u), side="right")
        return np.minimum(idx, self.size - 1).astype(np.int64)

    def from_keys(self, keys) -> np.ndarray:
        w = mix64_array(np.asarray(keys, dtype=np.uint64) ^ _PI_SALT)
        u = (w >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return self.from_uniforms(u)


def uniform_starts(keys, n: int) -> np.ndarray:
    w = mix64_array(np.asarray(keys, dtype=np.uint64) ^ _START_SALT)
    return (w & np.uint64((1 << n) - 1)).astype(np.int64)


def sample_pi(model: RateModel, key: int) -> int:
    return int(PiSampler(model).from_keys(np.array([key], dtype=np.uint64))[0])


def time_change_evaluate(model: RateModel, start: int, times, key: int,
                         max_events: int = DEFAULT_MAX_EVENTS) -> np.ndarray:
    """Metropolis states at physical ``times`` through the exploration clock."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise DomainError("times must be sorted and nonnegative")
    expl = model.with_mode("exploration")
    out, _, cens = kernels.time_change_batch(
        _checked_tau(expl), expl.n, expl.eta, np.array([start], dtype=np.int64),
        np.array([key], dtype=np.uint64), times, int(max_events))
    if cens[0]:
        raise ResourceError("clock did not reach the requested times", out[0])
    return out[0]


def hitting_times(model: RateModel, starts, target_mask, keys,
                  max_events: int = DEFAULT_MAX_EVENTS, threads: int | None = None):
    """First entrance times into ``target_mask`` for a batch; ``(times, censored)``."""
    target_mask = np.asarray(target_mask, dtype=np.uint8)
    if not target_mask.any():
        raise DomainError("target set is empty")
    tau = _checked_tau(model)
    fn = lambda s, k: kernels.hitting_batch(tau, model.n, model.eta, model.code, s, k,
                                            target_mask, int(max_events))
    times, _, cens = run_replicas(fn, starts, keys, threads=threads)
    return times, cens.astype(bool)


def hitting_time(model: RateModel, start, target, key: int,
                 max_events: int = DEFAULT_MAX_EVENTS) -> tuple[float, bool]:
    """First entrance into ``target`` from a vertex or from ``"pi"``.

    Returns ``(time, censored)``; a censored value is a lower bound.
    """
    mask = np.zeros(model.env.size, dtype=np.uint8)
    mask[list(target)] = 1
    if isinstance(start, str):
        if start != "pi":
            raise DomainError("start must be a vertex or 'pi'")
        start = sample_pi(model, key)
    t, c = hitting_times(model, [start], mask, [key], max_events)
    return float(t[0]), bool(c[0])


def wilson_interval(hits: int, total: int, level: float = 0.95) -> tuple[float, float]:
    if total == 0:
        return 0.0, 1.0
    ci = binomtest(int(hits), int(total)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class CorrelationEstimate:
    t: float
    s: float
    estimate: float
    ci: tuple
    completed: int
    censored: int
    hits: np.ndarray = field(repr=False)
    censored_mask: np.ndarray = field(repr=False)


def correlation(model: RateModel, c_n: float, t: float, s: float, replicas: int,
                seed: int, label: str = "correlation", initial: str = "uniform",
                max_events: int = DEFAULT_MAX_EVENTS, threads: int | None = None
                ) -> CorrelationEstimate:
    """Estimate ``P(X(c_n t) = X(c_n (t + s)))`` with a Wilson 95% interval.

    The Metropolis chain is evaluated only through the exploration clock.
    """
    if t < 0 or s < 0:
        raise DomainError("t and s must be nonnegative")
    expl = model.with_mode("exploration")
    keys = replica_keys(seed, f"{label}:{t!r}:{s!r}", replicas)
    if initial == "uniform":
        starts = uniform_starts(keys, model.n)
    elif initial == "pi":
        starts = PiSampler(expl).from_keys(keys)
    else:
        raise DomainError("initial must be 'uniform' or 'pi'")
    targets = np.array([c_n * t, c_n * (t + s)])
    tau = _checked_tau(expl)
    fn = lambda st, k: kernels.time_change_batch(tau, expl.n, expl.eta, st, k, targets,
                                                 int(max_events))
    states, _, cens = run_replicas(fn, starts, keys, threads=threads)
    cens = cens.astype(bool)
    hits = (states[:, 0] == states[:, 1]) & ~cens
    done = int((~cens).sum())
    h = int(hits.sum())
    est = h / done if done else math.nan
    return CorrelationEstimate(t, s, est, wilson_interval(h, done), done, int(cens.sum()),
                               hits, cens)

