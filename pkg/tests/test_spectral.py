import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.linalg import expm

from remlab._rng import replica_keys
from remlab.dynamics import RateModel, hitting_times
from remlab.environment import Environment
from remlab.errors import DomainError, PrecisionError
from remlab.spectral import (BetaFunctional, build_generator, bound_audit, canonical_paths,
                             f_functional, hitting_density, hitting_mean,
                             hitting_survival_spectral, local_time_functional,
                             local_time_moment, mixing_check, poincare_bound, spectral_gap,
                             spectral_gap_nonsymmetric)

from conftest import flat_env


def model(n, seed, beta=1.2, eta=0.1):
    return RateModel(Environment(n, beta, seed=seed), eta)


@pytest.mark.parametrize("n", [6, 8, 10])
def test_flat_gap(n):
    gen = build_generator(RateModel(flat_env(n), eta=0.5))
    assert abs(spectral_gap(gen) - 2 / n) <= 1e-8


def test_flat_gap_sparse_route():
    gen = build_generator(RateModel(flat_env(8), eta=0.5))
    assert abs(spectral_gap(gen, method="sparse") - 0.25) <= 1e-8


@pytest.mark.parametrize("seed", range(4))
def test_generator_residuals(seed):
    gen = build_generator(model(8, seed))
    assert gen.row_sum_residual() <= 1e-12
    assert gen.reversibility_residual() <= 1e-12
    assert gen.theta == pytest.approx(gen.total.max())


@pytest.mark.parametrize("seed", range(3))
def test_gap_routes_agree(seed):
    gen = build_generator(model(7, seed))
    g = spectral_gap(gen)
    assert spectral_gap_nonsymmetric(gen) == pytest.approx(g, rel=1e-7)
    assert spectral_gap(gen, "sparse") == pytest.approx(g, rel=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_poincare_bound_dominates_relaxation_time(seed):
    m = model(8, seed, beta=1.5, eta=0.2)
    gen = build_generator(m)
    res = poincare_bound(gen, canonical_paths(m))
    assert res.bound >= 1 / spectral_gap(gen)
    assert sum(res.rules.values()) == 256 * 255 // 2


def test_cyclic_path_example():
    m = RateModel(flat_env(4), eta=0.5)
    paths = canonical_paths(m)
    p, rule, good = paths.path(0, 5)
    assert p == [0, 1, 5] and good
    assert paths.path(0, 0)[0] == [0]


def test_paths_avoid_bad_vertices_when_possible():
    m = RateModel(flat_env(5), eta=0.5)
    fam = canonical_paths(m)
    fam.bad[1] = 1
    # far pair: the first good cyclic path starts at bit 1
    p, rule, good = fam.path(0, 15)
    assert good and rule == 1 and p == [0, 2, 6, 14, 15]
    # close pair with no admissible waypoint at n = 5 falls back to the ascending path
    p, rule, good = fam.path(0, 3)
    assert rule == 0 and p == [0, 1, 3] and not good
    assert all(bin(a ^ b).count("1") == 1 for a, b in zip(p[:-1], p[1:]))


def test_two_state_hitting_law():
    env = Environment.from_energies(np.array([0.0, -1.0]), beta=1.0)
    m = RateModel(env, eta=0.01)
    gen = build_generator(m)
    r = m.total_rate(0)
    t = np.linspace(0.0, 3.0, 13)
    law = hitting_density(gen, [1], 0, t)
    assert np.allclose(law.density, r * np.exp(-r * t), rtol=1e-9)
    assert np.allclose(law.cdf, 1 - np.exp(-r * t), atol=1e-10)
    assert law.mass == pytest.approx(1.0, abs=1e-10)
    assert law.mean == pytest.approx(1 / r, rel=1e-9)


def test_hitting_routes_agree():
    m = model(6, 2)
    gen = build_generator(m)
    a = [5, 40]
    t = np.linspace(0, 30, 61)
    law = hitting_density(gen, a, "pi", t)
    surv = hitting_survival_spectral(gen, a, "pi", t)
    assert np.allclose(law.cdf, 1 - surv, atol=1e-9)
    mean = hitting_mean(gen, a, "pi")
    assert law.mean == pytest.approx(mean, rel=1e-8)
    assert law.mass + law.atom == pytest.approx(1.0, abs=1e-9)
    # mean from the survival function integrates to the same value
    tail = integrate.quad(lambda s: hitting_survival_spectral(gen, a, "pi", [s])[0], 0, np.inf,
                          limit=200)[0]
    assert tail == pytest.approx(mean, rel=1e-6)


def test_hitting_mean_against_simulation():
    m = model(5, 1)
    gen = build_generator(m)
    mask = np.zeros(32, dtype=np.uint8)
    mask[[3, 17]] = 1
    R = 20000
    times, cens = hitting_times(m, np.zeros(R, dtype=np.int64), mask,
                                replica_keys(0, "hit", R))
    assert not cens.any()
    exact = hitting_mean(gen, [3, 17], 0)
    assert abs(times.mean() - exact) <= 4 * times.std() / math.sqrt(R)


def test_hitting_density_domain():
    gen = build_generator(model(4, 0))
    with pytest.raises(DomainError):
        hitting_density(gen, [3], 3, [1.0])
    with pytest.raises(DomainError):
        hitting_density(gen, [], 0, [1.0])
    with pytest.raises(PrecisionError):
        hitting_density(gen, [3], 0, [1e9], budget=1000)


def occupation_oracle(gen, x, s):
    Q = gen.L.toarray()
    return integrate.quad(lambda u: expm(u * Q)[x, x], 0, s, epsabs=1e-13)[0]


def test_local_time_mean_matches_occupation_integral():
    gen = build_generator(model(4, 3))
    for x, s in [(0, 2.0), (7, 5.0)]:
        assert local_time_moment(gen, x, s, 1.0) == pytest.approx(occupation_oracle(gen, x, s),
                                                                  rel=1e-9)


def test_local_time_fractional_moment_against_simulation():
    from remlab.dynamics import simulate
    m = model(3, 4)
    gen = build_generator(m)
    s, p = 3.0, 0.5
    exact = local_time_moment(gen, 0, s, p)
    vals = np.array([simulate(m, 0, s, int(k)).local_times.get(0, 0.0) ** p
                     for k in replica_keys(0, "lt", 20000)])
    assert abs(vals.mean() - exact) <= 4 * vals.std() / math.sqrt(len(vals))


def test_beta_functional_quadrature():
    h = lambda L: np.exp(-0.1 * L * L)
    g = BetaFunctional(0.4, h, nodes=40)
    a, b, s = 3, 5, 2.0
    dens = stats.beta(a, b).pdf
    oracle = integrate.quad(lambda u: (s * u) ** 0.4 * h(math.log(s * u)) * dens(u), 0, 1,
                            epsabs=1e-14)[0]
    assert g(s, a, b) == pytest.approx(oracle, rel=1e-10)
    assert BetaFunctional(1.0)(2.0, 2, 3) == pytest.approx(2.0 * 2 / 5)
    assert g(s, 1, 0) == pytest.approx(s**0.4 * h(math.log(s)))


def test_f_functional_is_one_at_one():
    g = f_functional(0.5, 30.0, 10.0)
    assert g(1.0, 1, 0) == pytest.approx(1.0)


def test_first_set_restriction_splits_the_total():
    gen = build_generator(model(4, 5))
    g = BetaFunctional(1.0)
    A = [2, 9]
    parts = [local_time_functional(gen, x, 4.0, g, first_set=A) for x in A]
    # E[l^x(s); first arrival at x] summed over x equals E[l^{first}(s)]
    assert all(p > 0 for p in parts)
    assert sum(parts) <= sum(local_time_functional(gen, x, 4.0, g) for x in A)


def test_mixing_profile():
    gen = build_generator(model(6, 0))
    res = mixing_check(gen, [0.5, 5.0, 50.0, 500.0])
    tv = [r["tv"] for r in res["rows"]]
    assert np.all(np.diff(tv) <= 0)
    assert all(r["pass"] for r in res["rows"])
    assert res["gap"] == pytest.approx(spectral_gap(gen), rel=1e-8)


def test_bound_audit_structure():
    m = model(6, 1, beta=1.5, eta=0.2)
    gen = build_generator(m)
    top = np.argsort(m.taus)[-2:]
    rep = bound_audit(gen, top, r_star=5.0, kappa_tilde=2.5 * 36 * 5.0, kappa_n=1296 * 5,
                      t_grid=[1.0, 10.0], alpha_n=0.5)
    assert rep["mean_upper"]["pass"]
    assert all(r["pass_lower"] for r in rep["local_time"])
    assert "survival_lower" in rep and "density_bounds" in rep


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (2.0, 0.4), (0.5, 7.3), (30.0, 200.0)])
def test_jacobi_rule_matches_scipy(a, b):
    from scipy.special import roots_jacobi
    from remlab.spectral import jacobi_rule
    x, w = jacobi_rule(20, a, b)
    X, W = roots_jacobi(20, a, b)
    assert np.allclose(x, X, atol=1e-13)
    assert np.allclose(w, W / W.sum(), atol=1e-13)


def test_jacobi_rule_survives_large_parameters():
    from remlab.spectral import jacobi_rule
    x, w = jacobi_rule(32, 4.0, 1500.5)
    assert np.all(np.isfinite(w)) and w.sum() == pytest.approx(1.0)
    # mean of (1 + x) / 2 under Beta(1501.5, 5)
    assert float(w @ ((1 + x) / 2)) == pytest.approx(1501.5 / 1506.5, rel=1e-12)
