import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import betainc, gamma

from remlab.dynamics import RateModel
from remlab.environment import Environment
from remlab.errors import DomainError
from remlab.landscape import TopSets
from remlab.scales import ScaleSet, beta_c
from remlab.spectral import build_generator, local_time_functional
from remlab.verification import (TailEstimate, aging_report, arcsine_cdf, blocked_sums,
                                 bn_corridor, bn_estimator, isotonic_nonincreasing,
                                 laplace_target, loglog_slope, nu_estimator, sample_windows,
                                 sigma_estimator, subordinator_marginal_check, trend_decreasing,
                                 truncated_mean)


def arcsine_oracle(alpha, w):
    c = 1 / (gamma(alpha) * gamma(1 - alpha))
    return c * integrate.quad(lambda v: v ** (alpha - 1) * (1 - v) ** (-alpha), 0, w,
                              epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def test_arcsine_lattice_against_quadrature():
    worst = 0.0
    for a in np.linspace(0.1, 0.9, 10):
        for w in np.linspace(0.05, 0.95, 10):
            worst = max(worst, abs(arcsine_cdf(a, w) - arcsine_oracle(a, w)))
    assert worst <= 1e-8


def test_arcsine_known_values():
    assert arcsine_cdf(0.5, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert arcsine_cdf(0.5, 0.25) == pytest.approx(2 / math.pi * math.asin(0.5))
    assert arcsine_cdf(0.3, 0.0) == 0.0 and arcsine_cdf(0.3, 1.0) == 1.0
    for bad in [(0.0, 0.5), (1.0, 0.5), (0.5, 1.5)]:
        with pytest.raises(DomainError):
            arcsine_cdf(*bad)


@given(st.floats(0.05, 0.95), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_arcsine_monotone_in_w(a, w1, w2):
    lo, hi = sorted((w1, w2))
    assert arcsine_cdf(a, lo) <= arcsine_cdf(a, hi)


def test_laplace_target_values():
    assert laplace_target(0.5, 1.0, 1.0) == pytest.approx(math.exp(-math.sqrt(math.pi)))
    assert laplace_target(0.7, 2.0, 0.0) == 1.0


@settings(max_examples=80)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40))
def test_isotonic_fit_properties(y):
    fit = isotonic_nonincreasing(y)
    assert len(fit) == len(y)
    assert np.all(np.diff(fit) <= 1e-9)
    assert fit.sum() == pytest.approx(sum(y), abs=1e-6)
    # nonincreasing input is left unchanged
    srt = sorted(y, reverse=True)
    assert np.allclose(isotonic_nonincreasing(srt), srt)


def test_trend_and_slope_helpers():
    assert trend_decreasing([3, 2, 1]) and not trend_decreasing([3, 3, 1])
    u = np.geomspace(0.25, 8, 13)
    est = TailEstimate("nu", u, 2 * u**-0.6, 2 * u**-0.6, np.zeros(13), 10)
    assert loglog_slope(est) == pytest.approx(-0.6)
    bump = TailEstimate("nu", u[:3], np.array([1.0, 2.0, 1.0]), np.ones(3), np.full(3, 0.25), 10)
    assert bump.max_raw_violation() == pytest.approx(2.0)


def test_subordinator_check_on_exact_stable_samples():
    # Levy law with scale pi/2 has Laplace transform exp(-Gamma(1/2) sqrt(lambda))
    rng = np.random.default_rng(0)
    s = (math.pi / 2) / rng.standard_normal(40000) ** 2
    rep = subordinator_marginal_check(s, 0.5, bootstrap=50)
    assert max(rep["deviation"]) < 0.01
    assert all(lo <= t <= hi for lo, t, hi in zip(rep["ci_low"], rep["target"], rep["ci_high"]))
    assert subordinator_marginal_check(s[:10], 0.5, bootstrap=5)["warnings"]


def test_bn_corridor():
    s = ScaleSet.build(14, 2.05, 1.0)
    assert bn_corridor(s, 1.0)["pass"]
    c = bn_corridor(s, 1.0)
    assert not bn_corridor(s, math.exp(1.01 * c["upper"] * s.log_r_star))["pass"]
    assert bn_corridor(s, math.exp(0.99 * c["lower"] * s.log_r_star))["pass"]


# --------------------------------------------------------------------- two-state oracle


def two_state_setup():
    env = Environment.from_energies(np.array([-2.0, 0.5]), beta=1.0)
    m = RateModel(env, eta=0.5)
    base = ScaleSet.build(10, 1.0, 0.5)
    s = dataclasses.replace(base, theta_n=2.0, c_n=1.0, a_n=10.0, b_n=1.0)
    return m, s


def exact_tails(m, s, u_grid):
    """k sum pi Q and k sum pi Q^2 with Q^u(y) = P_y(l^0(theta) > l_u)."""
    gen = build_generator(m)
    pi = m.stationary()
    tau, eta, theta = m.taus, m.eta, s.theta_n
    w0, w1 = max(eta, tau[0]), max(eta, tau[1])
    k = s.k_n(1.0)
    nu, sig = [], []
    for u in u_grid:
        # Z = (w0 l + w1 (theta - l)) / c_n > u  <=>  l > l_u
        lu = (u * s.c_n - w1 * theta) / (w0 - w1)
        if lu < 0:
            q = np.ones(2)
        else:
            def g(sv, a, b, lu=lu):
                if b == 0:
                    return float(sv > lu)
                return float(1 - betainc(a, b, min(lu / sv, 1.0)))
            q = np.array([local_time_functional(gen, 0, theta, g, start=y) for y in (0, 1)])
        nu.append(k * float(pi @ q))
        sig.append(k * float(pi @ q**2))
    return np.array(nu), np.array(sig)


def test_nu_and_sigma_unbiased_on_two_states():
    m, s = two_state_setup()
    u = np.array([3.0, 6.0, 9.0, 12.0])  # Z never exceeds w0 theta / c_n = 14.8
    nu_x, sig_x = exact_tails(m, s, u)
    assert np.all(sig_x <= nu_x) and np.all(sig_x > 0)
    first = sample_windows(m, s, 40000, 5, "nu")
    nu = nu_estimator(m, s, 1.0, u, sample=first)
    sig = sigma_estimator(m, s, 1.0, u, first=first)
    assert np.all(np.abs(nu.raw - nu_x) <= 2 * nu.ci_half_widths)
    assert np.all(np.abs(sig.raw - sig_x) <= 2 * sig.ci_half_widths)
    assert np.all(sig.raw <= nu.raw)


def test_truncated_mean_properties():
    m, s = two_state_setup()
    tm = truncated_mean(m, s, 1.0, [1e-9, 5.0, 1e9], replicas=2000)
    assert tm.raw[0] == 0.0
    assert np.all(np.diff(tm.raw) >= 0)
    smp = sample_windows(m, s, 2000, 0, "nu")
    assert tm.raw[-1] == pytest.approx(s.k_n(1.0) * smp.z.mean())


def test_estimators_need_bn():
    m, s = two_state_setup()
    s0 = dataclasses.replace(s, a_n=None)
    with pytest.raises(DomainError):
        nu_estimator(m, s0, 1.0, replicas=10)


def test_blocked_sums_equal_window_sums_in_law():
    m, s = two_state_setup()
    S = blocked_sums(m, s, 0.2, 4000, seed=1)  # k = 1 block
    Z = sample_windows(m, s, 4000, 1, "cmp", initial="uniform").z
    assert abs(S.mean() - Z.mean()) <= 4 * math.hypot(S.std(), Z.std()) / math.sqrt(4000)


# --------------------------------------------------------------------- b_n


def engineered_instance():
    h = np.zeros(256)
    h[[5, 77]] = -3.0
    env = Environment.from_energies(h, beta=1.0)
    s = ScaleSet.build(8, 1.0, 0.5)
    m = RateModel(env, eta=s.eta)
    return m, s, TopSets.explicit([5, 77])


def test_bn_exact_against_monte_carlo():
    m, s, top = engineered_instance()
    ex = bn_estimator(m, s, top, method="exact_small_n")
    mc = bn_estimator(m, s, top, replicas=40000, seed=2)
    assert abs(mc.b_n - ex.b_n) <= 3 * mc.se[0]
    assert abs(mc.b_n_circ - ex.b_n_circ) <= 3 * mc.se[1]
    assert ex.ordered() and isinstance(ex.b_n, float)


def test_bn_estimator_errors():
    m, s, top = engineered_instance()
    with pytest.raises(DomainError):
        bn_estimator(m, s, top, method="guess")
    with pytest.raises(DomainError):
        bn_estimator(m, s, TopSets.explicit([]), replicas=10)


def test_aging_report_structure():
    env = Environment(6, 1.5, seed=0)
    m = RateModel(env, 0.2)
    rep = aging_report(m, c_n=5.0, alpha=0.6, replicas=500, seed=0)
    assert len(rep["rows"]) == 2 and len(rep["ratio_consistency"]) == 1
    row = rep["rows"][0]
    assert row["limit"] == pytest.approx(arcsine_cdf(0.6, 0.5))
    assert 0 <= row["estimate"] <= 1 and row["se"] > 0
    panel = aging_report([m, RateModel(Environment(6, 1.5, seed=1), 0.2)], 5.0, 0.6,
                         replicas=200, seed=0)
    assert len(panel["rows"][0]["per_environment"]) == 2
