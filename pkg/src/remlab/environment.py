"""Seeded Gaussian environment on the hypercube.

Energies are generated counter-style: vertex ``x`` is hashed together with the
seed and the dimension into a 64-bit word, which is mapped to a standard normal
through the inverse CDF.  Nothing has to be stored, so any vertex of any
dimension can be queried in O(1); a dense table is kept only when asked for.
"""
from __future__ import annotations

import json
import math
from functools import cached_property

import numpy as np
from scipy.special import ndtri

from ._rng import GOLDEN, derive_key, mix64_array
from .errors import CapacityError, DomainError

CACHE_MAX_N = 24
_TWO_M64 = 2.0**-64
_EXP_MAX = math.log(np.finfo(float).max)


def standard_normal_from_words(words: np.ndarray) -> np.ndarray:
    """Map uniform 64-bit words to standard normals via ``ndtri((w + 0.5) / 2**64)``.

    The upper half of the words is reflected (``1 - p`` is formed exactly in
    integers) so both tails keep full relative precision.
    """
    w = np.asarray(words, dtype=np.uint64)
    upper = (w >> np.uint64(63)).astype(bool)
    m = np.where(upper, ~w, w)
    p = (m.astype(np.float64) + 0.5) * _TWO_M64
    z = ndtri(p)
    return np.where(upper, -z, z)


def gaussian_energies(seed: int, n: int, xs) -> np.ndarray:
    """Energies ``H(x) ~ N(0, n)`` for the vertices ``xs``; pure in ``(seed, n, x)``."""
    key = np.uint64(derive_key(seed, "energy", n))
    xs = np.asarray(xs, dtype=np.uint64)
    with np.errstate(over="ignore"):
        words = mix64_array(key + (xs + np.uint64(1)) * np.uint64(GOLDEN))
    return math.sqrt(n) * standard_normal_from_words(words)


def neighbors(x: int, n: int) -> list[int]:
    """The ``n`` single-bit flips of ``x`` in ascending bit order."""
    return [x ^ (1 << i) for i in range(n)]


def neighbor_table(n: int) -> np.ndarray:
    """``(2**n, n)`` array whose row ``x`` is ``neighbors(x, n)``."""
    xs = np.arange(1 << n, dtype=np.int64)
    return xs[:, None] ^ (np.int64(1) << np.arange(n, dtype=np.int64))[None, :]


def _check_tau_range(beta: float, energies) -> None:
    worst = float(np.max(-beta * np.asarray(energies))) if np.size(energies) else 0.0
    if worst > _EXP_MAX:
        raise OverflowError(
            f"exp(-beta*H) overflows: -beta*H reaches {worst:.1f} > {_EXP_MAX:.1f}"
        )


class Environment:
    """Random energy landscape ``H`` and Gibbs masses ``tau = exp(-beta H)``.

    Parameters
    ----------
    n : int
        Dimension of the hypercube.
    beta : float
        Inverse temperature (``beta = 0`` is accepted for degenerate tests).
    seed : int
        Experiment seed; energies are a pure function of ``(seed, n, x)``.
    cache : bool
        Keep a dense table of all ``2**n`` energies (only for ``n <= 24``).
    """

    def __init__(self, n: int, beta: float, seed: int = 0, cache: bool = True):
        if n < 1:
            raise DomainError("dimension must be >= 1")
        if beta < 0:
            raise DomainError("beta must be >= 0")
        self.n = int(n)
        self.beta = float(beta)
        self.seed = int(seed)
        self.cache = bool(cache) and self.n <= CACHE_MAX_N
        self._table = None

    @classmethod
    def from_energies(cls, energies, beta: float) -> "Environment":
        """Engineered environment with an explicit energy table of length ``2**n``."""
        energies = np.asarray(energies, dtype=np.float64)
        n = int(round(math.log2(len(energies))))
        if len(energies) != 1 << n:
            raise DomainError("energy table length must be a power of two")
        env = cls(n, beta, seed=0, cache=True)
        env._table = energies.copy()
        env._table.setflags(write=False)
        env.seed = None
        return env

    @property
    def size(self) -> int:
        return 1 << self.n

    def _check(self, x) -> None:
        xa = np.asarray(x)
        if np.any(xa < 0) or np.any(xa >= self.size):
            raise DomainError(f"vertex out of range for n={self.n}")

    def energies(self) -> np.ndarray:
        """Full energy table (read-only view)."""
        if self._table is not None:
            return self._table
        if self.n > CACHE_MAX_N:
            raise CapacityError(f"dense table needs n <= {CACHE_MAX_N}, got {self.n}")
        table = gaussian_energies(self.seed, self.n, np.arange(self.size))
        table.setflags(write=False)
        if self.cache:
            self._table = table
        return table

    @cached_property
    def taus(self) -> np.ndarray:
        """Full table of ``tau(x) = exp(-beta H(x))``."""
        h = self.energies()
        _check_tau_range(self.beta, h)
        t = np.exp(-self.beta * h)
        t.setflags(write=False)
        return t

    def hamiltonian(self, x):
        """``H(x)`` for a vertex or an integer array of vertices."""
        self._check(x)
        if self._table is not None:
            return self._table[x]
        scalar = np.ndim(x) == 0
        out = gaussian_energies(self.seed, self.n, np.atleast_1d(x))
        return float(out[0]) if scalar else out

    def tau(self, x):
        """``exp(-beta H(x))``; raises ``OverflowError`` rather than saturating."""
        if self._table is not None:
            self._check(x)
            t = self.taus[x]
            return t if np.ndim(x) else float(t)
        h = np.atleast_1d(self.hamiltonian(x))
        _check_tau_range(self.beta, h)
        t = np.exp(-self.beta * h)
        return t if np.ndim(x) else float(t[0])

    def to_json(self) -> str:
        d = {"n": self.n, "beta": self.beta, "seed": self.seed, "cache": self.cache}
        if self.seed is None:
            d["energies"] = self.energies().tolist()
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "Environment":
        d = json.loads(text)
        if d.get("energies") is not None:
            return cls.from_energies(d["energies"], d["beta"])
        return cls(d["n"], d["beta"], d["seed"], d.get("cache", True))

    def __repr__(self):
        return f"Environment(n={self.n}, beta={self.beta}, seed={self.seed})"
