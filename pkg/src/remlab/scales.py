"""Deterministic sequences: thresholds, time scales, exponents and the F-function.

All thresholds are defined through Gaussian tail identities and are solved
exactly (Newton on the log-survival function).  The closed-form asymptotic
expressions are kept only as diagnostics, see :func:`asymptotic_formulas`.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtri

from .errors import DomainError, InvalidRegimeError, PrecisionError

LN2 = math.log(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LN_MAX = math.log(np.finfo(float).max)

#: Header note carried by every report that involves the Levy tail.
SIGN_NOTE = (
    "Levy tail target is t*u^(-alpha(eps)); some displays of the limit print "
    "t*u^(+alpha(eps)), treated as a sign typo."
)

TOP_RULES = ("eps_n", "simple", "refined")


@dataclass(frozen=True)
class ThresholdQuery:
    rho: float
    n: int
    beta: float


def _log_sf(z: float) -> float:
    return float(log_ndtr(-z))


def gaussian_quantile_for_log_tail(log_p: float) -> float:
    """The ``z`` with ``log P(N(0,1) >= z) = log_p`` (``log_p < 0``)."""
    if not log_p < 0:
        raise DomainError("log tail probability must be negative")
    if log_p > -700:
        z = -float(ndtri(math.exp(log_p)))
    else:
        L = -log_p
        z = math.sqrt(2 * L - math.log(4 * math.pi * L))
    for _ in range(60):
        f = _log_sf(z) - log_p
        # d/dz log sf(z) = -phi(z)/sf(z)
        dlog = -math.exp(-0.5 * z * z - _LOG_SQRT_2PI - _log_sf(z))
        step = f / dlog
        z -= step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    if not math.isfinite(z):
        raise PrecisionError(f"cannot resolve Gaussian tail exp({log_p})")
    return z


def log_threshold(rho: float, n: int, beta: float) -> float:
    """``log r`` solving ``2**(rho n) P(tau >= r) = 1``."""
    if not rho > 0:
        raise DomainError("rho must be positive")
    z = gaussian_quantile_for_log_tail(-rho * n * LN2)
    return beta * math.sqrt(n) * z


def solve_threshold(q: ThresholdQuery) -> float:
    """Threshold level ``r_n(rho)``; raises ``PrecisionError`` if it overflows."""
    lr = log_threshold(q.rho, q.n, q.beta)
    if lr > _LN_MAX:
        raise PrecisionError(f"threshold exp({lr:.1f}) is not representable")
    return math.exp(lr)


def threshold_residual(r: float, rho: float, n: int, beta: float) -> float:
    """``|2**(rho n) P(tau >= r) - 1|`` evaluated in log space."""
    if beta == 0:
        return 0.0
    z = math.log(r) / (beta * math.sqrt(n))
    return abs(math.expm1(rho * n * LN2 + _log_sf(z)))


def beta_c(epsilon: float) -> float:
    return math.sqrt(epsilon * 2 * LN2)


@dataclass
class ScaleSet:
    """All derived sequences for fixed ``(n, beta, epsilon, c_star, theta_n)``.

    Build with :meth:`build`.  ``a_n`` and ``b_n`` stay ``None`` until a
    ``b_n`` estimate is attached with :meth:`with_bn`.
    """

    n: int
    beta: float
    epsilon: float
    c_star: float
    theta_n: float
    top_rule: str = "eps_n"
    beta_c: float = 0.0
    alpha: float = 0.0
    log_c_n: float = 0.0
    c_n: float = 0.0
    alpha_n: float = 0.0
    rho_star: float = 0.0
    log_r_star: float = 0.0
    r_star: float = 0.0
    delta_n: float = 0.0
    epsilon_n: float = 0.0
    log_r_eps_n: float = math.nan
    r_eps_n: float = math.nan
    kappa_n: float = 0.0
    kappa_tilde: float = 0.0
    nu_bar: float = 0.0
    a_n: float | None = None
    b_n: float | None = None
    warnings: list = field(default_factory=list)

    @classmethod
    def build(cls, n, beta, epsilon, c_star=2.5, theta_n=1.0, top_rule="eps_n"):
        if not 0 < epsilon <= 1:
            raise DomainError("epsilon must lie in (0, 1]")
        if beta <= 0:
            raise DomainError("beta must be positive")
        if theta_n <= 0:
            raise DomainError("theta_n must be positive")
        if top_rule not in TOP_RULES:
            raise DomainError(f"top_rule must be one of {TOP_RULES}")
        s = cls(int(n), float(beta), float(epsilon), float(c_star), float(theta_n), top_rule)
        s.beta_c = beta_c(epsilon)
        s.alpha = s.beta_c / s.beta
        s.log_c_n = log_threshold(epsilon, s.n, s.beta)
        s.c_n = _exp_or_raise(s.log_c_n)
        s.alpha_n = s.log_c_n / (s.n * s.beta**2)
        s.rho_star = s.c_star * math.log(s.n) / (s.n * LN2)
        s.log_r_star = log_threshold(s.rho_star, s.n, s.beta)
        s.r_star = _exp_or_raise(s.log_r_star)
        s.delta_n = delta_n(s.n, s.beta, s.epsilon, s.theta_n)
        s.epsilon_n = s.epsilon - s.delta_n
        if s.epsilon_n > 0:
            s.log_r_eps_n = log_threshold(s.epsilon_n, s.n, s.beta)
            s.r_eps_n = math.exp(s.log_r_eps_n)
        s.kappa_n = math.floor(s.n**4 * s.r_star)
        s.kappa_tilde = 2.5 * s.n**2 * s.r_star
        s.nu_bar = math.exp(
            s.beta * s.n * math.sqrt(LN2) * (1 + 2 * math.log(s.n) / (s.n * LN2))
        ) / s.n
        if not s.valid:
            s.warnings.append(
                f"invalid regime: epsilon_n={s.epsilon_n:.4g} <= rho*={s.rho_star:.4g}"
            )
        if not s.aging_regime:
            s.warnings.append(f"beta={s.beta:.4g} <= beta_c={s.beta_c:.4g}: alpha >= 1")
        return s

    @property
    def valid(self) -> bool:
        return self.epsilon_n > self.rho_star

    @property
    def aging_regime(self) -> bool:
        return 0 < self.alpha < 1

    @property
    def eta(self) -> float:
        return 1.0 / self.r_star

    def require_valid(self) -> None:
        if self.epsilon_n <= 0:
            raise InvalidRegimeError(f"epsilon_n={self.epsilon_n:.4g} <= 0: top is undefined")
        if not self.valid:
            raise InvalidRegimeError(
                f"epsilon_n={self.epsilon_n:.4g} <= rho*={self.rho_star:.4g}"
            )

    def top_threshold(self, rule: str | None = None) -> float:
        """Threshold defining the top set under the chosen rule.

        ``eps_n`` is the level of ``V_n(epsilon_n)``; ``simple`` is
        ``c_n / (n^2 theta_n)``; ``refined`` adds the quadratic log-correction.
        """
        rule = rule or self.top_rule
        if rule == "eps_n":
            if self.epsilon_n <= 0:
                raise InvalidRegimeError("epsilon_n <= 0: top threshold undefined")
            return self.r_eps_n
        L = math.log(self.n**2 * self.theta_n)
        if rule == "simple":
            return math.exp(self.log_c_n - L)
        if rule == "refined":
            return math.exp(self.log_c_n - L * (1 + L / (2 * self.n * self.beta * self.beta_c)))
        raise DomainError(f"unknown top rule {rule!r}")

    def with_bn(self, b_n: float) -> "ScaleSet":
        """Copy with ``b_n`` attached and ``a_n = 2**(eps n) / b_n``."""
        if not b_n > 0:
            raise DomainError("b_n must be positive to define a_n")
        a_n = 2.0 ** (self.epsilon * self.n) / b_n
        return dataclasses.replace(self, b_n=float(b_n), a_n=a_n, warnings=list(self.warnings))

    def k_n(self, t: float) -> int:
        """Number of blocks ``floor(a_n t / theta_n)``."""
        if self.a_n is None:
            raise DomainError("a_n unavailable: attach a b_n estimate first")
        # guard against a_n t / theta landing a rounding error below an integer
        return math.floor(self.a_n * t / self.theta_n * (1 + 1e-12))

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["valid"] = self.valid
        d["aging_regime"] = self.aging_regime
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return d


def _exp_or_raise(lx: float) -> float:
    if lx > _LN_MAX:
        raise PrecisionError(f"exp({lx:.1f}) is not representable")
    return math.exp(lx)


def c_n(s: ScaleSet) -> float:
    return s.c_n


def r_star(s: ScaleSet) -> float:
    return s.r_star


def alpha_n(s: ScaleSet) -> float:
    return s.alpha_n


def delta_n(n: int, beta: float, epsilon: float, theta_n: float) -> float:
    """Top-set offset with ``2**(n delta_n) = (n^2 theta_n)**alpha``."""
    return math.sqrt(2 * epsilon / LN2) * math.log(n * n * theta_n) / (n * beta)


def delta_and_top_threshold(s: ScaleSet, strict: bool = True):
    """``(delta_n, epsilon_n, r_n(epsilon_n))``; strict mode rejects invalid regimes."""
    if strict:
        s.require_valid()
    return s.delta_n, s.epsilon_n, s.r_eps_n


def f_function(s: ScaleSet, x):
    """``F(x) = x**(alpha_n - log x / (2 n beta^2)) / (1 - log x / (n beta beta_c))``.

    ``F(0) = 0`` by continuity; arguments at or past the pole raise ``DomainError``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("F is defined for x >= 0")
    pole = s.n * s.beta * s.beta_c
    with np.errstate(divide="ignore"):
        L = np.log(xa)
    if np.any(L >= pole):
        raise DomainError("F evaluated at or beyond its pole log x = n beta beta_c")
    out = np.zeros_like(xa)
    pos = xa > 0
    Lp = L[pos]
    out[pos] = np.exp((s.alpha_n - Lp / (2 * s.n * s.beta**2)) * Lp) / (1 - Lp / pole)
    return float(out) if np.ndim(x) == 0 else out


def f_params(s: ScaleSet) -> tuple[float, float, float]:
    """``(alpha_n, 2 n beta^2, n beta beta_c)`` as consumed by the compiled kernels."""
    return s.alpha_n, 2 * s.n * s.beta**2, s.n * s.beta * s.beta_c


def asymptotic_formulas(s: ScaleSet) -> dict:
    """Closed-form asymptotics with ``o(1)`` terms dropped, against the exact solves.

    Deviations are relative, ``|asymptotic / exact - 1|``, computed from logs.
    """
    n, beta, eps = s.n, s.beta, s.epsilon

    def log_r_asym(rho):
        bc = beta_c(rho)
        return n * beta * bc - (beta / (2 * bc)) * (math.log(bc * bc * n / 2) + math.log(4 * math.pi))

    out = {}
    lc = log_r_asym(eps)
    out["c_n"] = {"exact_log": s.log_c_n, "asymptotic_log": lc,
                  "rel_dev": abs(math.expm1(lc - s.log_c_n))}
    ln = math.log(n)
    lrs = beta * math.sqrt(2 * s.c_star * n * ln) * (1 - math.log(ln) / (8 * s.c_star * ln))
    out["r_star"] = {"exact_log": s.log_r_star, "asymptotic_log": lrs,
                     "rel_dev": abs(math.expm1(lrs - s.log_r_star))}
    if s.epsilon_n > 0:
        lre = log_r_asym(s.epsilon_n)
        out["r_eps_n"] = {"exact_log": s.log_r_eps_n, "asymptotic_log": lre,
                          "rel_dev": abs(math.expm1(lre - s.log_r_eps_n))}
        x = s.delta_n / eps
        ratio_exact = s.log_r_eps_n - s.log_c_n
        ratio_asym = -n * beta * s.beta_c * x * (1 + x / 2)
        out["top_ratio"] = {"exact_log": ratio_exact, "asymptotic_log": ratio_asym,
                            "rel_dev": abs(math.expm1(ratio_asym - ratio_exact))}
    return out


def theta_validation(s: ScaleSet, ll_tol: float = 0.1) -> dict:
    """Check ``theta_n`` against the block-length window; report only.

    ``ll_tol`` is the ratio bound standing in for ``log theta_n << n``.
    """
    log_theta = math.log(s.theta_n)
    gates = {}
    if s.alpha < 1:
        lower = 4 / (1 - s.alpha) * s.log_r_star
        gates["log_theta_above_lower"] = {"value": log_theta, "bound": lower,
                                          "pass": log_theta > lower}
    else:
        lower = math.inf
        gates["log_theta_above_lower"] = {"value": log_theta, "bound": None, "pass": False,
                                          "note": "alpha >= 1: lower bound undefined"}
    gates["theta_above_kappa"] = {"value": s.theta_n, "bound": s.kappa_n,
                                  "pass": s.theta_n >= s.kappa_n}
    upper = ll_tol * s.n
    gates["log_theta_small_vs_n"] = {"value": log_theta / s.n, "bound": ll_tol,
                                     "pass": log_theta / s.n <= ll_tol}
    window_empty = not lower < upper
    return {
        "kappa_n": s.kappa_n,
        "kappa_tilde": s.kappa_tilde,
        "nu_bar": s.nu_bar,
        "gates": gates,
        "window": {"lower_log_theta": lower if math.isfinite(lower) else None,
                   "upper_log_theta": upper, "empty": window_empty},
        "pass": all(g["pass"] for g in gates.values()),
    }


def scale_report(s: ScaleSet, ll_tol: float = 0.1) -> dict:
    """Everything about a ScaleSet in one JSON-ready dict."""
    residuals = {
        "c_n": threshold_residual(s.c_n, s.epsilon, s.n, s.beta),
        "r_star": threshold_residual(s.r_star, s.rho_star, s.n, s.beta),
    }
    if s.epsilon_n > 0:
        residuals["r_eps_n"] = threshold_residual(s.r_eps_n, s.epsilon_n, s.n, s.beta)
    delta_gap = abs(
        math.expm1(s.n * s.delta_n * LN2 - s.alpha * math.log(s.n**2 * s.theta_n))
    )
    return {
        "note": SIGN_NOTE,
        "scales": s.as_dict(),
        "residuals": residuals,
        "delta_identity_rel_gap": delta_gap,
        "F_at_1": f_function(s, 1.0),
        "asymptotics": asymptotic_formulas(s),
        "theta_validation": theta_validation(s, ll_tol),
    }
