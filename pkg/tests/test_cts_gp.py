import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from epinp._path import ContinuousPath
from epinp.cts_gp import (CtsGpPriors, ThinnedAugmentedState, gibbs_beta_star, run_cts_gp_mcmc,
                          sgcp_augmented_loglik, sir_thinned_augmented_loglik, thinned_point_step)
from epinp.epi import RemovalData, TimeScale
from epinp.errors import DataError, ParameterError
from epinp.gp import KernelParams
from epinp.parametric import GammaPrior, augmented_loglik
from oracles import (discretized_sir_density, inhomogeneous_poisson_likelihood, pooled_chisquare_pvalue,
                     sgcp_two_bin_marginal)

KER = KernelParams(2.0, 1.0)
R2 = np.array([2.0, 3.0])


def _two_person(g_inf=0.0, thinned=(), g_thin=(), beta_star=2.0):
    return ThinnedAugmentedState(0.0, np.array([1.0]), np.array([g_inf]), np.array(thinned, float),
                                 np.array(g_thin, float), beta_star, 1.0)


def test_sgcp_empty():
    assert sgcp_augmented_loglik([], [], 2.5, [], [], 4.0) == pytest.approx(-10.0)


def test_sgcp_one_point():
    assert sgcp_augmented_loglik([0.3], [], 1.0, [0.0], [], 1.0) == pytest.approx(-1 + math.log(0.5), abs=1e-14)


def test_sgcp_shape_checks():
    with pytest.raises(ParameterError):
        sgcp_augmented_loglik([0.3], [], 1.0, [], [], 1.0)
    with pytest.raises(ParameterError):
        sgcp_augmented_loglik([0.3], [], 0.0, [0.0], [], 1.0)


@pytest.mark.parametrize("g_bins,obs", [((0.5, -1.0), [0.2, 1.5]), ((2.0, 0.0), [0.1, 0.4, 0.9, 1.2]),
                                        ((-0.5, 1.5), [])])
def test_sgcp_marginalises_to_poisson(g_bins, obs):
    lam, edges = 3.0, np.array([0.0, 1.0, 2.0])

    def aug(o, th, go, gt):
        return sgcp_augmented_loglik(o, th, lam, go, gt, 2.0)

    got = sgcp_two_bin_marginal(obs, g_bins, edges, lam, aug)
    ref = inhomogeneous_poisson_likelihood(obs, g_bins, edges, lam)
    assert abs(got - ref) / ref < 1e-3


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), max_size=6), st.lists(st.floats(-5, 5), max_size=6),
       st.floats(0.01, 10.0), st.floats(0.1, 10.0))
def test_sgcp_sigma_pairing(g_obs, g_thin, lam, T):
    s = np.linspace(0.0, T, len(g_obs) + 2)[1:-1]
    th = np.linspace(0.0, T, len(g_thin) + 3)[1:-1][: len(g_thin)]
    a = sgcp_augmented_loglik(s, th, lam, g_obs, g_thin, T)
    b = sgcp_augmented_loglik(th, s, lam, -np.asarray(g_thin), -np.asarray(g_obs), T)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_sir_two_person_hand_value():
    ll = sir_thinned_augmented_loglik(_two_person(), R2, 2)
    assert math.exp(ll) == pytest.approx(2 * math.exp(-6), rel=1e-13)


def test_sir_large_g_reduces_to_parametric():
    st_ = _two_person(g_inf=60.0, beta_star=0.7)
    ref = augmented_loglik([1.0], 0.0, R2, 0.7, 1.0, 2)
    assert sir_thinned_augmented_loglik(st_, R2, 2) == pytest.approx(ref, rel=1e-10)


def test_sir_discretised_oracle():
    def g(t):
        return 0.3 - 0.4 * t

    st_ = _two_person(g_inf=g(1.0), thinned=[0.5], g_thin=[g(0.5)], beta_star=2.0)
    ref = discretized_sir_density(0.0, [1.0], R2, 2, None, 1.0, dt=1e-5, thinned=[0.5], g=g, beta_star=2.0)
    got = math.exp(sir_thinned_augmented_loglik(st_, R2, 2))
    assert abs(got - ref) / ref < 1e-3


def test_thinned_point_without_contacts_impossible():
    # after t = 1 nobody is susceptible
    st_ = _two_person(thinned=[1.5], g_thin=[0.0])
    assert sir_thinned_augmented_loglik(st_, R2, 2) == -np.inf


def test_thinned_point_outside_window_impossible():
    assert sir_thinned_augmented_loglik(_two_person(thinned=[-0.5], g_thin=[0.0]), R2, 2) == -np.inf
    assert sir_thinned_augmented_loglik(_two_person(thinned=[3.5], g_thin=[0.0]), R2, 2) == -np.inf


def test_gibbs_beta_star_moments():
    st_ = _two_person(thinned=[0.2, 0.6], g_thin=[0.0, 0.0])
    prior = GammaPrior(2.0, 3.0)
    rng = np.random.default_rng(1)
    draws = np.array([gibbs_beta_star(st_, R2, 2, prior, rng) for _ in range(100_000)])
    # one infection beyond i1, two thinned points, int XY = 1
    dist = stats.gamma(2.0 + 3, scale=1 / (3.0 + 1.0))
    assert abs(draws.mean() - dist.mean()) < 3 * dist.std() / math.sqrt(draws.size)
    assert stats.kstest(draws, dist.cdf).pvalue > 0.01


# -- thinned-point kernel --------------------------------------------------------------

def _g_known(t):
    return 1.0 - 0.8 * np.asarray(t)


def test_birth_death_kernel_targets_thinned_poisson_process():
    """On a frozen trajectory the thinned points form a Poisson process of
    rate ``beta* X Y sigmoid(-g)``; compare with direct simulation of it."""
    region = (np.array([0.0, 1.0]), np.array([1.0, 2.5]))

    def xy_at(t):
        return 1.0 if t < 1.0 else 2.0

    bstar = 1.5
    rng = np.random.default_rng(5)
    th, gt = np.zeros(0), np.zeros(0)
    edges = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
    ms, occ = [], []
    for step in range(250_000):
        th, gt, _, _ = thinned_point_step(th, gt, region, xy_at, bstar, lambda t, k: float(_g_known(t)), rng)
        if step % 100 == 99:
            ms.append(th.size)
            occ.append(np.histogram(th, edges)[0])
    ms, occ = np.array(ms), np.array(occ)

    # direct simulation: homogeneous rate bstar * 2 on the region, thinned
    sim_rng = np.random.default_rng(6)
    direct_m, direct_occ = [], []
    for _ in range(ms.size):
        k = sim_rng.poisson(bstar * 2.0 * 2.5)
        t = sim_rng.uniform(0.0, 2.5, size=k)
        keep = sim_rng.random(k) < (np.where(t < 1.0, 1.0, 2.0) / 2.0) / (1 + np.exp(_g_known(t)))
        direct_m.append(int(keep.sum()))
        direct_occ.append(np.histogram(t[keep], edges)[0])
    direct_m, direct_occ = np.array(direct_m), np.array(direct_occ)

    mean = integrate.quad(lambda t: bstar * xy_at(t) / (1 + np.exp(_g_known(t))), 0, 2.5, points=[1.0])[0]
    for sample in (ms, direct_m):
        assert abs(sample.mean() - mean) < 4 * math.sqrt(mean / sample.size) * 2
    hi = int(stats.poisson(mean).ppf(0.999))
    cats = np.arange(hi + 1)
    obs = np.array([np.sum(ms == c) for c in cats[:-1]] + [np.sum(ms >= hi)])
    pmf = np.r_[stats.poisson(mean).pmf(cats[:-1]), stats.poisson(mean).sf(hi - 1)]
    assert pooled_chisquare_pvalue(obs, pmf) > 0.01
    for b in range(edges.size - 1):
        assert stats.mannwhitneyu(occ[:, b], direct_occ[:, b]).pvalue > 0.001


def test_no_data_thinned_count_is_poisson():
    data = RemovalData(np.array([1.0, 1.7, 2.2, 3.0]), 6)
    bstar = 0.8
    out = run_cts_gp_mcmc(data, KER, iterations=4000, thin=4, burnin=100, seed=3, no_data=True,
                          fixed_beta_star=bstar, thinned_moves_per_sweep=20)
    path = ContinuousPath(np.r_[out.params["i1"][0], out.extra["infections"][0]], data.times, data.N)
    mean = bstar * path.integrals()[0]
    assert np.all(out.params["i1"] == out.params["i1"][0])
    m = out.params["M"].astype(int)
    hi = int(stats.poisson(mean).ppf(0.995))
    obs = np.array([np.sum(m == c) for c in range(hi)] + [np.sum(m >= hi)])
    pmf = np.r_[stats.poisson(mean).pmf(np.arange(hi)), stats.poisson(mean).sf(hi - 1)]
    assert pooled_chisquare_pvalue(obs, pmf) > 0.01


# -- sampler ----------------------------------------------------------------------------

SMALL = RemovalData(np.array([2.0, 2.6, 3.1, 3.3, 4.2, 5.0, 5.5]), 12)


def test_states_stay_valid():
    out = run_cts_gp_mcmc(SMALL, KER, iterations=200, thin=5, seed=4, check_states=True)
    assert len(out) == 32
    assert out.beta.shape == (32, 200)
    assert np.all(out.beta > 0) and np.all(out.beta <= out.params["beta_star"][:, None])
    for k, (a, p) in out.acceptance.items():
        assert 0 <= a <= p


def test_fixed_seed_bit_identical():
    a = run_cts_gp_mcmc(SMALL, KER, iterations=60, thin=2, seed=11)
    b = run_cts_gp_mcmc(SMALL, KER, iterations=60, thin=2, seed=11)
    assert np.array_equal(a.beta, b.beta)
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k], equal_nan=True)


def test_custom_report_grid():
    grid = np.linspace(0.0, 5.5, 7)
    out = run_cts_gp_mcmc(SMALL, KER, iterations=20, thin=2, seed=1, report_grid=grid)
    assert np.array_equal(out.beta_grid, grid)


def test_discrete_data_rejected():
    with pytest.raises(DataError):
        run_cts_gp_mcmc(RemovalData(np.array([2, 3]), 4, TimeScale.DISCRETE), KER, iterations=5)


def test_bad_epsilon_rejected():
    with pytest.raises(ParameterError):
        run_cts_gp_mcmc(SMALL, KER, iterations=5, epsilon=1.5)


def test_default_priors():
    p = CtsGpPriors()
    assert p.beta_star.mean == pytest.approx(0.01)
