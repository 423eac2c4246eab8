import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from epinp.epi import Constant, Geometric, Tabulated
from epinp.errors import ParameterError
from epinp.simulate import final_size_oracle, simulate_continuous, simulate_discrete
from oracles import final_size_by_enumeration


def test_single_individual_continuous():
    rem = [simulate_continuous(1, 1.0, 2.0, seed=s).removal_times[0] for s in range(3000)]
    assert stats.kstest(rem, stats.expon(scale=0.5).cdf).pvalue > 0.01


def test_single_individual_has_one_removal():
    ev = simulate_continuous(1, 5.0, 1.0, seed=3)
    assert [e.kind for e in ev.events] == ["I", "R"]


def test_zero_rate_gives_final_size_one():
    for s in range(50):
        assert simulate_continuous(6, 0.0, 1.0, seed=s).final_size == 1
        assert simulate_discrete(6, 0.0, 0.4, seed=s).final_size == 1


def test_constant_and_tabulated_streams_identical():
    tab = Tabulated(np.linspace(-1, 200, 50), np.full(50, 0.3))
    for s in range(20):
        a = simulate_continuous(8, Constant(0.3), 1.0, seed=s)
        b = simulate_continuous(8, tab, 1.0, seed=s)
        assert a.events == b.events


def test_same_seed_same_path():
    assert simulate_discrete(50, 0.05, 0.3, seed=9).events == simulate_discrete(50, 0.05, 0.3, seed=9).events


def test_unbounded_rate_rejected():
    with pytest.raises(ParameterError):
        simulate_continuous(3, np.inf, 1.0, seed=0)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_final_size_oracle_matches_enumeration(N):
    assert np.allclose(final_size_oracle(N, 0.7, 1.3), final_size_by_enumeration(N, 0.7, 1.3), atol=1e-14)


def test_final_size_oracle_small_cases():
    assert final_size_oracle(2, 1.0, 1.0)[1] == pytest.approx(0.5, abs=1e-15)
    assert final_size_oracle(5, 0.0, 1.0)[1] == 1.0
    p = final_size_oracle(10, 0.3, 0.5)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        final_size_oracle(11, 1.0, 1.0)


@pytest.mark.parametrize("N,runs", [(2, 20_000), (3, 100_000), (4, 20_000)])
def test_continuous_final_size_distribution(N, runs):
    p = final_size_oracle(N, 1.0, 1.0)
    ss = np.random.SeedSequence(N).spawn(runs)
    counts = np.bincount([simulate_continuous(N, 1.0, 1.0, seed=s).final_size for s in ss], minlength=N + 1)
    freq = counts / runs
    se = np.sqrt(p * (1 - p) / runs)
    assert np.all(np.abs(freq - p) <= 3 * se + 1e-12)


def test_discrete_second_infection_probability():
    runs = 100_000
    rng = np.random.default_rng(5)
    hits = sum(bool(np.any(simulate_discrete(2, np.log(2.0), 0.5, seed=rng).infection_times == 1))
               for _ in range(runs))
    assert abs(hits / runs - 0.5) < 0.005


def test_discrete_one_step_binomial():
    N, beta = 7, 0.2
    rng = np.random.default_rng(11)
    runs = 100_000
    c = np.zeros(N, dtype=int)
    for _ in range(runs):
        ev = simulate_discrete(N, beta, 0.5, seed=rng)
        c[int(np.sum(ev.infection_times == 1))] += 1
    p = stats.binom(N - 1, -np.expm1(-beta)).pmf(np.arange(N))
    exp = p * runs
    # pool the sparse upper tail
    k = int(np.argmax(np.cumsum(exp[::-1]) >= 5))
    keep = N - k
    obs = np.r_[c[:keep - 1], c[keep - 1:].sum()]
    ex = np.r_[exp[:keep - 1], exp[keep - 1:].sum()]
    assert stats.chisquare(obs, ex).pvalue > 0.01


def test_geometric_one_removes_next_day():
    ev = simulate_discrete(30, 0.05, Geometric(1.0), seed=2)
    for i, r in ev.by_individual().values():
        assert r == i + 1


def test_discrete_labels_follow_removal_order():
    ev = simulate_discrete(200, 0.01, 0.3, seed=4)
    by = ev.by_individual()
    rem = [by[k][1] for k in sorted(by)]
    assert rem == sorted(rem)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 25), beta=st.floats(0.0, 0.5), gamma=st.floats(0.05, 1.0), seed=st.integers(0, 2**32 - 1))
def test_simulated_paths_are_valid(N, beta, gamma, seed):
    for ev in (simulate_continuous(N, beta, gamma, seed=seed), simulate_discrete(N, beta, gamma, seed=seed)):
        ev.validate()
        assert ev.complete and 1 <= ev.final_size <= N
