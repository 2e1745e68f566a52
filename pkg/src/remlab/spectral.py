"""Exact linear algebra for the exploration chain at small ``n``.

Covers the generator and its spectral gap, the canonical-path congestion
bound, mixing, hitting-time laws by uniformization, and exact expectations of
functionals of local times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import betaln, gammainc
from scipy.stats import poisson

from . import kernels
from .dynamics import RateModel
from .errors import CapacityError, DomainError, PrecisionError

SPARSE_MAX_N = 20
DENSE_MAX_N = 13
POISSON_TAIL = 1e-12


@dataclass
class Generator:
    """Rates of the exploration chain with its invariant law.

    ``theta`` is the uniformization constant (the exact maximal total rate).
    """

    n: int
    L: sp.csr_matrix = field(repr=False)
    pi: np.ndarray = field(repr=False)
    total: np.ndarray = field(repr=False)
    edge_x: np.ndarray = field(repr=False)
    edge_y: np.ndarray = field(repr=False)
    edge_rate: np.ndarray = field(repr=False)
    theta: float
    nu_bar: float | None = None
    eta: float = 0.0

    @property
    def size(self) -> int:
        return 1 << self.n

    def row_sum_residual(self) -> float:
        rs = np.asarray(self.L.sum(axis=1)).ravel()
        return float(np.max(np.abs(rs) / self.total))

    def reversibility_residual(self) -> float:
        flow = self.pi[self.edge_x] * self.edge_rate
        N, n = self.size, self.n
        back = flow.reshape(N, n)[self.edge_y, np.tile(np.arange(n), N)]
        return float(np.max(np.abs(flow - back) / np.maximum(flow, back)))

    def edge_flow(self) -> np.ndarray:
        """``pi(x) rate(x, x ^ (1 << b))`` as an ``(N, n)`` array."""
        return (self.pi[self.edge_x] * self.edge_rate).reshape(self.size, self.n)

    def symmetric_dense(self) -> np.ndarray:
        """``D^(1/2) (-L) D^(-1/2)`` assembled symmetric by construction."""
        if self.n > DENSE_MAX_N:
            raise CapacityError(f"dense operations limited to n <= {DENSE_MAX_N}")
        N = self.size
        fwd = self.edge_rate.reshape(N, self.n)
        back = fwd[self.edge_y, np.tile(np.arange(self.n), N)]
        S = np.zeros((N, N))
        S[self.edge_x, self.edge_y] = -np.sqrt(self.edge_rate * back)
        S[np.arange(N), np.arange(N)] = self.total
        return S

    def symmetric_sparse(self) -> sp.csr_matrix:
        N = self.size
        fwd = self.edge_rate.reshape(N, self.n)
        back = fwd[self.edge_y, np.tile(np.arange(self.n), N)]
        off = sp.csr_matrix((-np.sqrt(self.edge_rate * back), (self.edge_x, self.edge_y)),
                            shape=(N, N))
        return (off + sp.diags(self.total)).tocsr()

    def dirichlet(self, f: np.ndarray) -> float:
        """``(1/2) sum pi(x) rate(x, y) (f(x) - f(y))^2``; only positive terms."""
        d = f[self.edge_x] - f[self.edge_y]
        return 0.5 * float(np.sum(self.pi[self.edge_x] * self.edge_rate * d * d))


def build_generator(model: RateModel, nu_bar: float | None = None) -> Generator:
    """Sparse generator of the exploration chain of ``model``."""
    if model.n > SPARSE_MAX_N:
        raise CapacityError(f"generator assembly limited to n <= {SPARSE_MAX_N}")
    expl = model.with_mode("exploration")
    x, y, lam = expl.edge_rates()
    N = expl.env.size
    total = lam.reshape(N, expl.n).sum(axis=1)
    L = sp.csr_matrix((lam, (x, y)), shape=(N, N)) - sp.diags(total)
    return Generator(expl.n, L.tocsr(), expl.stationary(), total, x, y, lam,
                     float(total.max()), nu_bar, expl.eta)


def _rayleigh(gen: Generator, v: np.ndarray) -> float:
    f = v / np.sqrt(gen.pi)
    f = f - np.dot(gen.pi, f)
    var = float(np.dot(gen.pi, f * f))
    return gen.dirichlet(f) / var


def low_spectrum(gen: Generator, k: int = 2, method: str = "auto"):
    """The ``k`` smallest eigenpairs of the symmetrized negative generator."""
    if method == "auto":
        method = "dense" if gen.n <= 12 else "sparse"
    if method == "dense":
        w, v = sla.eigh(gen.symmetric_dense(), subset_by_index=[0, k - 1])
        return w, v
    S = gen.symmetric_sparse()
    shift = 1e-9 * float(gen.total.min())
    try:
        w, v = spla.eigsh(S, k=k, sigma=-shift, which="LM", tol=1e-14)
    except spla.ArpackNoConvergence as exc:  # pragma: no cover
        raise PrecisionError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(w)
    return w[order], v[:, order]


def spectral_gap(gen: Generator, method: str = "auto") -> float:
    """Smallest nonzero eigenvalue of ``-L``, refined by the Rayleigh quotient."""
    w, v = low_spectrum(gen, 2, method)
    if abs(w[0]) > 1e-10 * gen.theta:
        raise PrecisionError(f"bottom eigenvalue {w[0]:.3e} is not zero")
    return _rayleigh(gen, v[:, 1])


def spectral_gap_nonsymmetric(gen: Generator) -> float:
    """Gap from the eigenvalues of the raw generator (cross-check, small n)."""
    if gen.n > 8:
        raise CapacityError("nonsymmetric cross-check limited to n <= 8")
    ev = np.sort(np.real(sla.eigvals(-gen.L.toarray())))
    return float(ev[1])


# --------------------------------------------------------------------------- paths


@dataclass
class PathFamily:
    """Canonical paths over a fixed set of bad vertices."""

    n: int
    bad: np.ndarray = field(repr=False)
    far: float

    def path(self, x: int, y: int) -> tuple[list, int, bool]:
        """``(vertices, rule, good)`` for the pair ``(x, y)``."""
        p, rule = kernels.canonical_path(int(x), int(y), self.n, self.bad, self.far)
        good = not any(self.bad[v] for v in p[1:-1])
        return list(p), int(rule), good


def canonical_paths(model: RateModel) -> PathFamily:
    """Path family avoiding the hills ``{tau <= eta}`` of the model."""
    n = model.n
    bad = (model.taus <= model.eta).astype(np.uint8)
    return PathFamily(n, bad, n / math.log(n) if n > 1 else 1.0)


@dataclass
class PoincareResult:
    bound: float
    edge: tuple
    bad_paths: int
    rules: dict
    max_length: int

    @property
    def all_good(self) -> bool:
        return self.bad_paths == 0


def poincare_bound(gen: Generator, paths: PathFamily) -> PoincareResult:
    """Canonical-path upper bound on ``1 / gap`` and its maximizing edge."""
    loads, bad_paths, rules, max_len = kernels.path_congestion(paths.bad, gen.pi, gen.n,
                                                               paths.far)
    flow = gen.edge_flow()
    ratio = np.where(loads > 0, loads / flow, 0.0)
    i = int(np.argmax(ratio))
    x, b = divmod(i, gen.n)
    return PoincareResult(float(ratio.flat[i]), (x, x ^ (1 << b)), int(bad_paths),
                          {"first_good": int(rules[1]), "waypoint": int(rules[2]),
                           "fallback": int(rules[0])}, int(max_len))


# --------------------------------------------------------------------------- mixing


def full_spectrum(gen: Generator):
    S = gen.symmetric_dense()
    w, v = sla.eigh(S)
    return w, v / np.sqrt(gen.pi)[:, None]


def mixing_check(gen: Generator, times, spectrum=None) -> dict:
    """Worst relative deviation ``|P_x(Y(t) = y) / pi(y) - 1|`` and TV distance.

    Deviations are summed over the nonzero modes, so they do not lose
    precision to cancellation against ``pi``.
    """
    w, phi = spectrum if spectrum is not None else full_spectrum(gen)
    gap = float(w[1])
    wk, pk = w[1:], phi[:, 1:]
    rows = []
    for t in np.atleast_1d(times):
        dev = (pk * np.exp(-t * wk)) @ pk.T
        rel = float(np.max(np.abs(dev)))
        tv = 0.5 * np.max(np.sum(np.abs(dev) * gen.pi[None, :], axis=1))
        tv_bound = 0.5 * math.sqrt(float(np.max((1 - gen.pi) / gen.pi))) * math.exp(-t * gap)
        pw = float(np.max((1 - gen.pi) / gen.pi)) * math.exp(-t * gap)
        rows.append({"t": float(t), "max_rel_dev": rel, "pointwise_bound": pw,
                     "tv": float(tv), "tv_bound": tv_bound,
                     "pass": bool(tv <= tv_bound * (1 + 1e-9) + 1e-300)})
    return {"gap": gap, "rows": rows}


# --------------------------------------------------------------------------- hitting


def _mask(size, a) -> np.ndarray:
    m = np.zeros(size, dtype=bool)
    idx = np.asarray(list(a), dtype=np.int64)
    if idx.size == 0:
        raise DomainError("target set is empty")
    m[idx] = True
    return m


def _start_vector(gen: Generator, start) -> np.ndarray:
    if isinstance(start, str):
        if start != "pi":
            raise DomainError("start must be a vertex or 'pi'")
        return gen.pi.copy()
    v = np.zeros(gen.size)
    v[int(start)] = 1.0
    return v


def hitting_mean(gen: Generator, a, start="pi") -> float:
    """``E H(A)`` from the linear system ``-L m = 1`` off ``A``."""
    inA = _mask(gen.size, a)
    c = np.flatnonzero(~inA)
    m = np.zeros(gen.size)
    if c.size:
        Lcc = gen.L[c][:, c].tocsc()
        m[c] = spla.spsolve(-Lcc, np.ones(c.size))
    return float(np.dot(_start_vector(gen, start), m))


def hitting_survival_spectral(gen: Generator, a, start, t) -> np.ndarray:
    """``P(H(A) > t)`` via the eigen-decomposition of the killed generator."""
    inA = _mask(gen.size, a)
    c = np.flatnonzero(~inA)
    S = gen.symmetric_dense()[np.ix_(c, c)]
    w, v = sla.eigh(S)
    sq = np.sqrt(gen.pi[c])
    v0 = _start_vector(gen, start)[c]
    left = (v0 / sq) @ v
    right = v.T @ sq
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.exp(-np.outer(t, w)) @ (left * right)


@dataclass
class HittingLaw:
    t: np.ndarray
    density: np.ndarray
    joint: np.ndarray | None
    targets: np.ndarray
    cdf: np.ndarray
    atom: float
    mass: float | None
    mean: float | None
    terms: int
    theta: float


def _uniformized_steps(gen: Generator, inA: np.ndarray, v0: np.ndarray, K: int, keep_joint: bool):
    """Arrival probabilities into ``A`` at each uniformized step ``1..K+1``."""
    LT = gen.L.T.tocsr()
    A = np.flatnonzero(inA)
    v = v0.copy()
    v[inA] = 0.0
    arrivals = np.zeros((K + 1, len(A))) if keep_joint else np.zeros(K + 1)
    for k in range(K + 1):
        v = v + (LT @ v) / gen.theta
        hit = v[A]
        if keep_joint:
            arrivals[k] = hit
        else:
            arrivals[k] = hit.sum()
        v[A] = 0.0
    return arrivals


def _doubling_sums(gen: Generator, inA: np.ndarray, v0: np.ndarray):
    """``sum_k a_k`` and ``sum_k (k + 1) a_k`` by repeated squaring on ``A^c``."""
    c = np.flatnonzero(~inA)
    if c.size > 1024:
        return None, None
    P = sp.eye(gen.size, format="csr") + gen.L / gen.theta
    Pd = P.toarray()
    Q = Pd[np.ix_(c, c)]
    R1 = Pd[np.ix_(c, np.flatnonzero(inA))].sum(axis=1)
    S0 = np.eye(c.size)
    S1 = np.zeros_like(S0)
    M = Q.copy()
    m = 1
    for _ in range(200):
        S1 = S1 + M @ (S1 + m * S0)
        S0 = S0 + M @ S0
        M = M @ M
        m *= 2
        if np.max(M.sum(axis=1)) < 1e-17:
            break
    else:
        raise PrecisionError("geometric series did not converge")
    u = v0[c]
    mass = float(u @ S0 @ R1)
    moment = float(u @ (S1 + S0) @ R1)
    return mass, moment


def hitting_density(gen: Generator, a, start, t_grid, joint: bool = False,
                    budget: int = 20_000_000) -> HittingLaw:
    """Density of ``H(A)`` on ``t_grid`` by uniformization.

    The series is cut where the Poisson tail falls below ``1e-12``, with at
    most ``Theta t + 12 sqrt(Theta t) + 50`` terms.  ``joint`` keeps the
    density split by arrival vertex.  For a ``"pi"`` start the mass already
    in ``A`` is reported as ``atom``.
    """
    inA = _mask(gen.size, a)
    v0 = _start_vector(gen, start)
    if not isinstance(start, str) and inA[int(start)]:
        raise DomainError("start must lie outside A for the density form")
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0):
        raise DomainError("times must be nonnegative")
    mu = gen.theta * t
    K = int(math.ceil(float(np.max(mu + 12 * np.sqrt(mu))) + 50)) if t.size else 0
    if K > budget:
        raise PrecisionError(f"uniformization needs {K} terms, budget {budget}")
    arr = _uniformized_steps(gen, inA, v0, K, joint)
    k = np.arange(K + 1)
    dens = np.zeros(len(t))
    jt = np.zeros((len(t), int(inA.sum()))) if joint else None
    cdf = np.zeros(len(t))
    tot = arr.sum(axis=1) if joint else arr
    for i, m in enumerate(mu):
        lo = max(0, int(poisson.ppf(POISSON_TAIL, m)) - 1) if m > 0 else 0
        hi = min(K, int(poisson.isf(POISSON_TAIL, m)) + 1) if m > 0 else 0
        w = poisson.pmf(k[lo:hi + 1], m)
        dens[i] = gen.theta * float(w @ tot[lo:hi + 1])
        if joint:
            jt[i] = gen.theta * (w @ arr[lo:hi + 1])
        # P(H <= t) = sum_k a_k P(Gamma(k + 1) <= Theta t)
        cdf[i] = float(np.sum(tot[:hi + 1] * gammainc(k[:hi + 1] + 1, m))) if m > 0 else 0.0
    atom = float(v0[inA].sum())
    mass, moment = _doubling_sums(gen, inA, v0)
    mean = moment / gen.theta if moment is not None else None
    return HittingLaw(t, dens, jt, np.flatnonzero(inA), cdf + atom, atom, mass, mean, K + 1,
                      gen.theta)


# --------------------------------------------------------------------------- local times


def _visit_sequences(gen: Generator, x: int, first_set: np.ndarray, v0: np.ndarray, K: int):
    """Uniformized first-arrival law at ``x`` (killed on ``first_set``) and return law."""
    LT = gen.L.T.tocsr()
    f = np.zeros(K + 1)
    r = np.zeros(K + 1)
    v = v0.copy()
    for m in range(K + 1):
        f[m] = v[x]
        v[first_set] = 0.0
        if m < K:
            v = v + (LT @ v) / gen.theta
    v = np.zeros(gen.size)
    v[x] = 1.0
    for m in range(1, K + 1):
        v = v + (LT @ v) / gen.theta
        r[m] = v[x]
        v[x] = 0.0
    return f, r


def _visit_count_law(f: np.ndarray, r: np.ndarray, K: int) -> np.ndarray:
    """``D[j, k] = P(j-th visit at step <= k)`` for ``j = 1..``; rows until negligible."""
    rows = []
    pmf = f[:K + 1].copy()
    for _ in range(K + 1):
        cdf = np.cumsum(pmf)
        if cdf[-1] < 1e-16:
            break
        rows.append(np.minimum(cdf, 1.0))
        pmf = np.convolve(pmf, r[:K + 1])[:K + 1]
    if not rows:
        return np.zeros((0, K + 1))
    return np.array(rows)


def jacobi_rule(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Jacobi nodes and normalized weights for ``(1 - x)^a (1 + x)^b``.

    Golub-Welsch on the three-term recurrence.  Weights sum to one, so no
    Beta-function normalization is formed; it overflows once ``a + b`` is in
    the hundreds.
    """
    k = np.arange(m, dtype=float)
    s2 = 2 * k + a + b
    diag = np.empty(m)
    diag[0] = (b - a) / (a + b + 2)
    diag[1:] = (b * b - a * a) / (s2[1:] * (s2[1:] + 2))
    k1, t = k[1:], s2[1:]
    off = np.sqrt(4 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b) / (t * t * (t + 1) * (t - 1)))
    x, v = sla.eigh_tridiagonal(diag, off)
    w = v[0] ** 2
    return x, w / w.sum()


class BetaFunctional:
    """``E g(s B)`` for ``B ~ Beta(a, b)`` with ``g(u) = u^p h(log u)``.

    ``h`` must be smooth in ``log u``; the power ``p`` is absorbed into the
    Gauss-Jacobi weight so the quadrature stays accurate near ``u = 0``.
    """

    def __init__(self, power: float, h=None, nodes: int = 32):
        self.p = float(power)
        self.h = h
        self.m = nodes
        self._cache: dict = {}

    def __call__(self, s: float, a: int, b: int) -> float:
        if b == 0:
            return s**self.p * (self.h(math.log(s)) if self.h else 1.0)
        key = (s, a, b)
        if key in self._cache:
            return self._cache[key]
        scale = math.exp(betaln(a + self.p, b) - betaln(a, b)) * s**self.p
        if self.h is None:
            val = scale
        else:
            # weight (1 - x)^(b-1) (1 + x)^(a+p-1) on [-1, 1], u = (1 + x) / 2
            xg, wg = jacobi_rule(self.m, b - 1, a + self.p - 1)
            u = (1 + xg) / 2
            val = scale * float(np.dot(wg, self.h(np.log(s * u)))) / float(wg.sum())
        self._cache[key] = val
        return val


def f_functional(alpha_n: float, two_nb2: float, pole: float) -> BetaFunctional:
    """The F-function as ``u^alpha_n`` times a factor smooth in ``log u``."""

    def h(L):
        return np.exp(-L * L / two_nb2) / (1.0 - L / pole)

    return BetaFunctional(alpha_n, h)


def local_time_functional(gen: Generator, x: int, s: float, g: BetaFunctional, start="pi",
                          first_set=None, budget: int = 200_000) -> float:
    """Exact ``E[g(l^x(s)); first arrival in first_set is at x]``.

    Uniformize at rate ``Theta``: given ``K`` events in ``[0, s]`` the ``K + 1``
    slots have uniform spacings, so ``j`` slots at ``x`` give ``l = s B`` with
    ``B ~ Beta(j, K + 1 - j)``.  ``first_set`` defaults to ``{x}``; passing a
    larger set restricts to paths whose first arrival in it is ``x``.
    ``g(0)`` is taken to be 0.
    """
    mu = gen.theta * s
    K = int(math.ceil(mu + 12 * math.sqrt(mu) + 50))
    if K > budget:
        raise PrecisionError(f"local-time series needs {K} terms, budget {budget}")
    v0 = _start_vector(gen, start)
    fs = np.zeros(gen.size, dtype=bool)
    fs[x] = True
    if first_set is not None:
        fs[np.asarray(list(first_set), dtype=np.int64)] = True
    f, r = _visit_sequences(gen, int(x), fs, v0, K)
    D = _visit_count_law(f, r, K)
    lo = max(0, int(poisson.ppf(POISSON_TAIL, mu)) - 1)
    hi = min(K, int(poisson.isf(POISSON_TAIL, mu)) + 1)
    total = 0.0
    for k in range(lo, hi + 1):
        wk = poisson.pmf(k, mu)
        if wk == 0.0:
            continue
        acc = 0.0
        J = min(D.shape[0], k + 1)
        for j in range(1, J + 1):
            pj = D[j - 1, k] - (D[j, k] if j < D.shape[0] and j <= k else 0.0)
            if pj <= 0.0:
                continue
            acc += pj * g(s, j, k + 1 - j)
        total += wk * acc
    return total


def local_time_moment(gen: Generator, x: int, s: float, power: float) -> float:
    """``E_x[l^x(s)^power]`` exactly."""
    return local_time_functional(gen, x, s, BetaFunctional(power), start=x)


# --------------------------------------------------------------------------- audit


def bound_audit(gen: Generator, a, r_star: float, kappa_tilde: float, kappa_n: float,
                t_grid, alpha_n: float, slack: float = 2.0, local_vertices=None,
                local_s=None) -> dict:
    """Exact hitting and local-time quantities against their two-sided bounds."""
    n = gen.n
    a = np.unique(np.asarray(list(a), dtype=np.int64))
    pa = float(gen.pi[a].sum())
    EH = hitting_mean(gen, a, "pi")
    # the lower bounds carry the factor 1 - n pi(A) and say nothing once it is <= 0
    vacuous = n * pa >= 1
    lower_mean = 0.0 if vacuous else (1 - n * pa) ** 2 / (r_star * n * pa * (1 - pa)) * (1 - pa)
    upper_mean = kappa_tilde / pa * (1 - pa)
    out = {
        "pi_A": pa,
        "E_pi_H": EH,
        "lower_bounds_vacuous": bool(vacuous),
        "mean_lower": {"bound": lower_mean, "pass": bool(lower_mean <= EH)},
        "mean_upper": {"bound": upper_mean, "pass": bool(EH <= upper_mean)},
    }
    t = np.asarray(t_grid, dtype=float)
    surv = hitting_survival_spectral(gen, a, "pi", t) if n <= 10 else None
    if surv is not None:
        if vacuous:
            sl = np.zeros_like(t)
        else:
            sl = (1 - n * pa) * np.exp(-t * r_star * n * pa / (1 - n * pa))
        out["survival_lower"] = {"t": t.tolist(), "survival": surv.tolist(),
                                 "bound": sl.tolist(),
                                 "pass": bool(np.all(surv >= sl * (1 - 1e-9)))}
        # density from the same decomposition, checked against the two-sided bound
        eps = 1e-6 * np.maximum(t, 1e-12)
        dens = (hitting_survival_spectral(gen, a, "pi", np.maximum(t - eps, 0))
                - hitting_survival_spectral(gen, a, "pi", t + eps)) / (2 * eps)
        dl = (1 / EH) * (1 - kappa_tilde / EH) ** 2 * (1 - t / EH)
        du = (1 / EH) * (1 + kappa_tilde / (2 * np.maximum(t, 1e-300)))
        out["density_bounds"] = {
            "density": dens.tolist(), "lower": dl.tolist(), "upper": du.tolist(),
            "pass": bool(np.all(dens >= dl / slack) and np.all(dens <= du * slack)),
        }
    rows = []
    for x in list(local_vertices if local_vertices is not None else a[:3]):
        lam = float(gen.total[x])
        for s in (local_s if local_s is not None else [1.0 / lam, 10.0 / lam]):
            for p in (1.0, alpha_n):
                val = local_time_moment(gen, int(x), float(s), p)
                trite = lam**-p * math.gamma(1 + p) * gammainc(1 + p, s * lam) + s**p * math.exp(-s * lam)
                upper = kappa_n**p + (s**p * (s - kappa_n) * r_star * n * gen.pi[x]
                                      if s > kappa_n else 0.0)
                rows.append({"x": int(x), "s": float(s), "power": p, "moment": val,
                             "lower": trite, "upper": upper, "limit": math.gamma(1 + p) * lam**-p,
                             "pass_lower": bool(val >= trite * (1 - 1e-8)),
                             "pass_upper": bool(val <= slack * upper)})
    out["local_time"] = rows
    return out
