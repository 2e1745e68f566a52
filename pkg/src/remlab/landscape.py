"""Level sets of the Gibbs mass, their connected components and the top sets."""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RateModel
from .environment import Environment
from .errors import CapacityError, DomainError
from .scales import ScaleSet

log = logging.getLogger(__name__)

SCAN_MAX_N = 26


@dataclass
class LevelSetDecomposition:
    """Vertices with ``tau >= threshold`` split into connected classes.

    Classes are sorted by their smallest member, which is also their id.
    """

    threshold: float
    n: int
    members: np.ndarray
    components: list
    label: np.ndarray = field(repr=False)

    def component_of(self, x: int) -> int:
        """Index into ``components`` of the class containing ``x``."""
        c = int(self.label[x])
        if c < 0:
            raise DomainError(f"vertex {x} is not a member")
        return c

    @property
    def component_index(self) -> dict:
        return {int(x): int(self.label[x]) for x in self.members}

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.components], dtype=np.int64)


def _require_scan(n: int) -> None:
    if n > SCAN_MAX_N:
        raise CapacityError(f"exhaustive scan limited to n <= {SCAN_MAX_N}")


def components_of_mask(mask: np.ndarray, n: int) -> tuple[list, np.ndarray]:
    """Breadth-first labelling of the subgraph induced by ``mask``."""
    label = np.full(mask.shape[0], -1, dtype=np.int64)
    comps = []
    bits = [1 << i for i in range(n)]
    for root in np.flatnonzero(mask).tolist():
        if label[root] >= 0:
            continue
        cid = len(comps)
        label[root] = cid
        queue = deque([root])
        comp = [root]
        while queue:
            v = queue.popleft()
            for b in bits:
                w = v ^ b
                if mask[w] and label[w] < 0:
                    label[w] = cid
                    queue.append(w)
                    comp.append(w)
        comps.append(np.sort(np.array(comp, dtype=np.int64)))
    # roots are visited in ascending order, so ids already follow smallest members
    return comps, label


def level_set(env: Environment, threshold: float) -> LevelSetDecomposition:
    """Exact decomposition of ``{x : tau(x) >= threshold}``."""
    if not threshold > 0:
        raise DomainError("threshold must be positive")
    _require_scan(env.n)
    mask = env.taus >= threshold
    comps, label = components_of_mask(mask, env.n)
    return LevelSetDecomposition(float(threshold), env.n, np.flatnonzero(mask), comps, label)


def hills(env: Environment, r_star: float) -> np.ndarray:
    """Vertices with ``tau <= 1 / r_star``."""
    if not r_star > 1:
        raise DomainError("r_star must exceed 1")
    _require_scan(env.n)
    return np.flatnonzero(env.taus <= 1.0 / r_star)


def immersion(a, v_star: LevelSetDecomposition) -> np.ndarray:
    """Union of the classes of ``v_star`` that meet ``a``."""
    a = np.asarray(sorted(set(int(x) for x in a)), dtype=np.int64)
    if a.size == 0:
        return a
    if np.any(v_star.label[a] < 0):
        raise DomainError("immersion requires a subset of the level set")
    ids = np.unique(v_star.label[a])
    return np.sort(np.concatenate([v_star.components[i] for i in ids]))


def local_maxima(env: Environment) -> np.ndarray:
    """Strict local maxima of ``tau``; exact ties go to the smaller index."""
    _require_scan(env.n)
    tau = env.taus
    N = env.size
    x = np.arange(N)
    is_max = np.ones(N, dtype=bool)
    ties = 0
    for i in range(env.n):
        y = x ^ (1 << i)
        ty = tau[y]
        tie = tau == ty
        ties += int(tie.sum())
        is_max &= (tau > ty) | (tie & (x < y))
    if ties:
        log.warning("%d exact ties in tau broken by vertex index", ties // 2)
    return np.flatnonzero(is_max)


@dataclass
class TopSets:
    threshold: float
    t_n: np.ndarray
    t_star: np.ndarray
    t_circ: np.ndarray
    i_star: np.ndarray
    m_n: np.ndarray
    v_star: LevelSetDecomposition = field(repr=False)
    v_bar_star: np.ndarray = field(repr=False)
    valley_level: float = 0.0

    @classmethod
    def explicit(cls, t_n, t_circ=None) -> "TopSets":
        """Top set given directly, for engineered environments."""
        t_n = np.unique(np.asarray(list(t_n), dtype=np.int64))
        t_circ = t_n if t_circ is None else np.unique(np.asarray(list(t_circ), dtype=np.int64))
        if np.setdiff1d(t_circ, t_n).size:
            raise DomainError("isolated part must lie in the top set")
        empty = np.zeros(0, dtype=np.int64)
        return cls(math.nan, t_n, t_n, t_circ, empty, empty, None, empty, math.nan)

    def flags(self, size: int) -> np.ndarray:
        """Per-vertex bit flags understood by the simulation kernels."""
        from .kernels import FLAG_TOP, FLAG_TOP_ALONE

        f = np.zeros(size, dtype=np.uint8)
        f[self.t_n] |= FLAG_TOP
        f[self.t_circ] |= FLAG_TOP_ALONE
        return f


def top_sets(env: Environment, scales: ScaleSet, rule: str | None = None,
             allow_invalid: bool = False) -> TopSets:
    """Top set, its immersion, the isolated part, the inner part and local maxima.

    Outside the valid regime ``allow_invalid`` lets the construction proceed;
    valleys are then taken at ``min(r_star, top threshold)`` so that the top
    still sits inside them.
    """
    if not allow_invalid:
        scales.require_valid()
    thr = scales.top_threshold(rule)
    valley_level = min(scales.r_star, thr)
    v_star = level_set(env, valley_level)
    tau = env.taus
    t_n = np.flatnonzero(tau >= thr)
    t_star = immersion(t_n, v_star)
    lab = v_star.label[t_n]
    ids, counts = np.unique(lab, return_counts=True)
    alone = np.isin(lab, ids[counts == 1])
    t_circ = t_n[alone]
    # hi equals r_star in the valid regime; below it only under override
    lo, hi = 1.0 / scales.r_star, valley_level
    inner = np.ones(len(t_n), dtype=bool)
    for i in range(env.n):
        ty = tau[t_n ^ (1 << i)]
        inner &= (ty > lo) & (ty < hi)
    i_star = t_n[inner]
    return TopSets(thr, t_n, t_star, t_circ, i_star, local_maxima(env), v_star,
                   np.flatnonzero(tau <= lo), valley_level)


def _ratio(obs, pred):
    return obs / pred if pred else math.nan


def lemma21_report(env: Environment, scales: ScaleSet, top: TopSets) -> dict:
    """Observed set sizes against their leading-order predictions."""
    n, eps_n, c = env.n, scales.epsilon_n, scales.c_star
    base = 2.0**n * n**-c
    top_size = 2.0 ** (n * (1 - eps_n))
    v_star = level_set(env, scales.r_star)
    v_bar = top.v_bar_star
    t_minus = np.setdiff1d(top.t_n, top.t_circ)
    circ_minus_i = np.setdiff1d(top.t_circ, top.i_star)
    max_comp = int(v_star.sizes.max()) if v_star.components else 0
    comp_bound = 1.0 / (scales.rho_star * (1 - 2 / c))
    rows = {
        "V_star": (len(v_star.members), base),
        "V_bar_star": (len(v_bar), base),
        "T": (len(top.t_n), top_size),
        "T_circ": (len(top.t_circ), top_size),
        "T_minus_T_circ": (len(t_minus), n**4 * 2.0 ** (n * (1 - 2 * eps_n))),
        "I_star": (len(top.i_star), top_size * (1 - 2 * n ** (1 - c))),
        "T_circ_minus_I_star": (len(circ_minus_i), 2 * n ** (1 - c) * top_size),
        "max_component_V_star": (max_comp, comp_bound),
        "V_bar_star_and_M": (len(np.intersect1d(v_bar, top.m_n)), 0.0),
    }
    return {
        "n": n,
        "valid_regime": scales.valid,
        "sizes": {k: {"observed": int(o), "predicted": p, "ratio": _ratio(o, p)}
                  for k, (o, p) in rows.items()},
        "components_V_star": len(v_star.components),
        "components_V_bar_star": len(components_of_mask(env.taus <= 1 / scales.r_star, n)[0]),
    }


def conductance(model: RateModel, c, c_tilde) -> float:
    """``sum_{x in c, y in c_tilde} pi(x) rate(x, y)`` with normalized ``pi``."""
    c = np.unique(np.asarray(list(c), dtype=np.int64))
    ct = np.unique(np.asarray(list(c_tilde), dtype=np.int64))
    if np.intersect1d(c, ct).size:
        raise DomainError("sets must be disjoint")
    pi = model.stationary()
    inside = np.zeros(model.env.size, dtype=bool)
    inside[ct] = True
    total = 0.0
    for x in c.tolist():
        nb, _ = model.jump_distribution(x)
        r = model.rates_from(x)
        total += pi[x] * float(r[inside[nb]].sum())
    return total


def write_vertex_csv(path, env: Environment, top: TopSets) -> None:
    """One row per vertex in any of the top sets or the local maxima of the top."""
    label = top.v_star.label
    flagged = np.union1d(top.t_n, np.intersect1d(top.m_n, top.v_star.members))
    sets = {name: set(getattr(top, name).tolist()) for name in ("t_n", "t_circ", "i_star", "m_n")}
    h = env.energies()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "H", "tau", "component", "T", "T_circ", "I_star", "M"])
        for x in flagged.tolist():
            w.writerow([x, repr(float(h[x])), repr(float(env.taus[x])), int(label[x]),
                        *(int(x in sets[k]) for k in ("t_n", "t_circ", "i_star", "m_n"))])


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
