import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from epinp._path import ContinuousPath
from epinp.epi import RemovalData, TimeScale
from epinp.errors import ParameterError
from epinp.parametric import (GammaPrior, ParametricPriors, ParametricState, _mh_infection_move,
                              augmented_loglik, gibbs_beta, gibbs_gamma, move_infection_time,
                              run_parametric_mcmc, update_initial_time)
from epinp.scenarios import simulate_major_outbreak
from oracles import discretized_sir_density

TWO = RemovalData(np.array([2.0, 3.0]), 2)
TWO_STATE = ParametricState(0.0, np.array([1.0]), 1.0, 1.0)


def test_two_person_hand_value():
    ll = augmented_loglik([1.0], 0.0, [2.0, 3.0], 1.0, 1.0, 2)
    assert math.exp(ll) == pytest.approx(2 * math.exp(-5), rel=1e-14)


def test_two_person_discretised_oracle():
    ref = discretized_sir_density(0.0, [1.0], [2.0, 3.0], 2, 1.0, 1.0, dt=1e-5)
    got = math.exp(augmented_loglik([1.0], 0.0, [2.0, 3.0], 1.0, 1.0, 2))
    assert abs(got - ref) / ref < 1e-3


def test_infection_with_no_infectives_is_impossible():
    # the only infective is removed at 1, the next infection at 2 has no source
    assert augmented_loglik([2.0, 3.0], 0.0, [1.0, 5.0, 6.0], 1.0, 1.0, 3) == -np.inf


def test_infection_after_last_removal_is_impossible():
    assert augmented_loglik([4.0], 0.0, [2.0, 3.0], 1.0, 1.0, 2) == -np.inf


def test_dimension_mismatch():
    with pytest.raises(ParameterError):
        augmented_loglik([1.0, 1.5], 0.0, [2.0, 3.0], 1.0, 1.0, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10_000))
def test_integrals_match_riemann_sum(n, seed):
    rng = np.random.default_rng(seed)
    dt = 1e-4
    ticks = np.sort(rng.choice(np.arange(1, 40_000), size=2 * n - 1, replace=False))
    times = ticks * dt
    # a valid ordering: infections first keeps Y >= 1 until the last removal
    inf = np.r_[0.0, times[: n - 1]]
    rem = times[n - 1:]
    N = n + 3
    path = ContinuousPath(inf, rem, N)
    ixy, iy = path.integrals()
    mids = (np.arange(int(round(rem[-1] / dt))) + 0.5) * dt
    ninf = np.searchsorted(inf, mids, side="right")
    nrem = np.searchsorted(rem, mids, side="right")
    y = ninf - nrem
    x = N - ninf
    assert ixy == pytest.approx(np.sum(x * y) * dt, rel=1e-6)
    assert iy == pytest.approx(np.sum(y) * dt, rel=1e-6)


def _moment_and_ks(draws, dist):
    se = dist.std() / math.sqrt(draws.size)
    assert abs(draws.mean() - dist.mean()) < 3 * se
    assert stats.kstest(draws, dist.cdf).pvalue > 0.01


def test_gibbs_gamma_two_person():
    rng = np.random.default_rng(11)
    prior = GammaPrior(1.0, 1.0)
    draws = np.array([gibbs_gamma(TWO_STATE, TWO, prior, rng) for _ in range(100_000)])
    _moment_and_ks(draws, stats.gamma(3.0, scale=1 / 5.0))


def test_gibbs_beta_single_infection():
    # m = 1: only the exponent contributes
    data = RemovalData(np.array([2.0]), 5)
    state = ParametricState(0.5, np.zeros(0), 1.0, 1.0)
    prior = GammaPrior(2.0, 3.0)
    rng = np.random.default_rng(12)
    draws = np.array([gibbs_beta(state, data, prior, rng) for _ in range(100_000)])
    _moment_and_ks(draws, stats.gamma(2.0, scale=1 / (3.0 + 4 * 1.5)))


def _i1_cdf_oracle(rho):
    upper = 1.0
    grid = np.arange(upper - 15.0, upper + 1e-12, 1e-3)
    logp = np.array([augmented_loglik([1.0], g, [2.0, 3.0], 1.0, 1.0, 2) if g < upper else -np.inf
                     for g in grid[:-1]] + [augmented_loglik([1.0], upper - 1e-12, [2.0, 3.0], 1.0, 1.0, 2)])
    logp += math.log(rho) - rho * (2.0 - grid)
    dens = np.exp(logp - logp.max())
    cdf = np.r_[0.0, np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))]
    return grid, cdf / cdf[-1]


def test_initial_time_matches_gridded_density():
    priors = ParametricPriors(init_gap_rate=0.1)
    rng = np.random.default_rng(13)
    draws = np.sort([update_initial_time(TWO_STATE, TWO, priors, rng) for _ in range(100_000)])
    grid, cdf = _i1_cdf_oracle(0.1)
    model = np.interp(draws, grid, cdf)
    ecdf_hi = np.arange(1, draws.size + 1) / draws.size
    ecdf_lo = np.arange(draws.size) / draws.size
    ks = max(np.max(ecdf_hi - model), np.max(model - ecdf_lo))
    assert ks < 0.01


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 1.9), st.floats(1e-3, 50.0), st.integers(0, 1000))
def test_initial_time_below_support_bound(i2, rho, seed):
    state = ParametricState(i2 - 1.0, np.array([i2]), 0.5, 0.5)
    i1 = update_initial_time(state, TWO, ParametricPriors(init_gap_rate=rho), seed)
    assert i1 < min(i2, 2.0)


def test_large_gap_rate_pins_initial_time():
    priors = ParametricPriors(init_gap_rate=1e6)
    state = ParametricState(-1.0, np.zeros(0), 1.0, 1.0)
    data = RemovalData(np.array([2.0]), 3)
    draws = [update_initial_time(state, data, priors, s) for s in range(200)]
    assert 2.0 - np.mean(draws) < 1e-5


def test_move_to_same_value_always_accepted():
    state = ParametricState(0.0, np.array([0.5, 1.2]), 1.0, 1.0)
    data = RemovalData(np.array([1.0, 1.5, 2.0]), 3)
    ok, new, _ = _mh_infection_move(state, data, 1, 1.2, 1 - 1e-12)
    assert ok and np.array_equal(new.infections, state.infections)


def test_move_creating_gap_rejected():
    state = ParametricState(0.0, np.array([0.5, 1.2]), 1.0, 1.0)
    data = RemovalData(np.array([1.0, 1.5, 2.0]), 3)
    # without i_2 < 1 nobody is infective between 1 and the next infection
    ok, new, _ = _mh_infection_move(state, data, 0, 1.3, 1e-300)
    assert not ok and new is state


def test_move_stationarity_on_toy():
    """One infection move applied to exact draws from the gridded target
    leaves the coarse-cell distribution unchanged."""
    data = RemovalData(np.array([1.0, 1.5, 2.0]), 3)
    h = 0.01
    mids = (np.arange(200) + 0.5) * h
    cells, weights = [], []
    for a in range(200):
        for b in range(a + 1, 200):
            ll = augmented_loglik([mids[a], mids[b]], 0.0, data.times, 1.0, 1.0, 3)
            if ll > -np.inf:
                cells.append((a, b))
                weights.append(math.exp(ll))
    cells = np.array(cells)
    p = np.array(weights) / np.sum(weights)

    def coarse(a, b):
        return int(a // 0.5) * 4 + int(b // 0.5)

    expected = np.zeros(16)
    for (a, b), w in zip(cells, p):
        expected[coarse(mids[a], mids[b])] += w

    rng = np.random.default_rng(14)
    n = 20_000
    picks = rng.choice(len(p), size=n, p=p)
    counts = np.zeros(16)
    for k in picks:
        a, b = cells[k]
        start = np.sort([(a + rng.random()) * h, (b + rng.random()) * h])
        state = ParametricState(0.0, start, 1.0, 1.0)
        for _ in range(3):
            _, state, _ = move_infection_time(state, data, rng)
        counts[coarse(*state.infections)] += 1
    keep = expected * n >= 5
    obs = np.r_[counts[keep], counts[~keep].sum()]
    exp = np.r_[expected[keep], expected[~keep].sum()] * n
    if exp[-1] < 5:
        obs, exp = obs[:-1], exp[:-1] * obs[:-1].sum() / exp[:-1].sum()
    assert stats.chisquare(obs, exp).pvalue > 0.01


def test_no_data_reproduces_priors():
    data = RemovalData(np.array([1.0, 2.0, 4.0, 5.0]), 10)
    priors = ParametricPriors(GammaPrior(2.0, 50.0), GammaPrior(3.0, 4.0), 0.5)
    out = run_parametric_mcmc(data, priors, iterations=6000, thin=2, burnin=0, seed=5, no_data=True)
    assert stats.kstest(out.params["beta"], stats.gamma(2.0, scale=1 / 50.0).cdf).pvalue > 0.01
    assert stats.kstest(out.params["gamma"], stats.gamma(3.0, scale=1 / 4.0).cdf).pvalue > 0.01


def test_recovers_simulation_truth():
    ev, _ = simulate_major_outbreak(200, 0.002, 0.5, seed=3, min_final_size=20,
                                    time_scale=TimeScale.CONTINUOUS)
    data = ev.to_removal_data()
    out = run_parametric_mcmc(data, ParametricPriors(), iterations=3000, thin=5, seed=8, check_states=True)
    for name, truth in (("beta", 0.002), ("gamma", 0.5)):
        tr = out.params[name]
        assert abs(tr.mean() - truth) < 3 * tr.std()


def test_fixed_seed_bit_identical():
    a = run_parametric_mcmc(TWO, iterations=300, thin=3, seed=21)
    b = run_parametric_mcmc(TWO, iterations=300, thin=3, seed=21)
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])
    assert np.array_equal(a.extra["infections"], b.extra["infections"])


def test_retention_count():
    out = run_parametric_mcmc(TWO, iterations=1000, thin=10, burnin=200, seed=1)
    assert len(out) == 80
    assert out.iterations[0] == 210 and out.iterations[-1] == 1000


def test_zero_iterations_rejected():
    with pytest.raises(ParameterError):
        run_parametric_mcmc(TWO, iterations=0, seed=1)
