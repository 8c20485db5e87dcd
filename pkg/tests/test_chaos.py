import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kacchaos.chaos import (Budget, EmpiricalMarginal, chaoticity_test, equilibrated_snapshots,
                            extract_marginal, ks_distance, non_increasing_within,
                            propagation_test, stationarity_pretest, wasserstein1)
from kacchaos.equilibrium import equilibrium_law
from kacchaos.errors import DomainError, StatisticalTestFailure
from kacchaos.meanfield import equilibrium_sampler, uniform_sampler


def test_extract_full_state():
    states = [np.arange(5.0), np.arange(5.0) + 10]
    m = extract_marginal(states, 5, np.random.default_rng(0))
    assert m.samples.shape == (2, 5)
    assert sorted(m.samples[1]) == list(np.arange(5.0) + 10)


def test_extract_disjoint_tuples():
    m = extract_marginal([np.arange(10.0)], 2, np.random.default_rng(1), per_snapshot="all")
    assert m.samples.shape == (5, 2)
    assert sorted(m.samples.ravel()) == list(np.arange(10.0))


def test_extract_k_too_large():
    with pytest.raises(DomainError):
        extract_marginal([np.zeros(3)], 4, np.random.default_rng(0))


def test_ks_trivial_cases():
    cdf = stats.norm.cdf
    assert ks_distance([0.0], cdf) == pytest.approx(0.5)
    assert ks_distance([-50.0, -60.0], cdf) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        ks_distance([], cdf)


def test_ks_matches_scipy():
    x = np.random.default_rng(2).standard_normal(1000)
    assert ks_distance(x, stats.norm.cdf) == pytest.approx(stats.kstest(x, "norm").statistic,
                                                           abs=1e-15)


def test_ks_null_bound():
    n = 10 ** 5
    x = np.random.default_rng(3).standard_normal(n)
    assert ks_distance(x, stats.norm.cdf) < 1.95 / math.sqrt(n)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200, unique=True))
def test_self_distance_floor(xs):
    x = np.sort(np.array(xs))
    ecdf = lambda t: np.searchsorted(x, t, side="right") / len(x)  # noqa: E731
    d = ks_distance(x, ecdf)
    assert 0.0 <= d <= 1.0 / len(x) + 1e-15


def test_w1_cases():
    a = np.random.default_rng(4).standard_normal(1000)
    assert wasserstein1(a, a.copy()) == 0.0
    assert wasserstein1([0.0], [1.0]) == 1.0
    rng = np.random.default_rng(5)
    n = 10 ** 5
    d = wasserstein1(rng.standard_normal(n), 0.1 + rng.standard_normal(n))
    assert d == pytest.approx(0.1, abs=0.01)
    assert d == pytest.approx(stats.wasserstein_distance(rng.standard_normal(n),
                                                         0.1 + rng.standard_normal(n)), abs=0.01)
    with pytest.raises(DomainError):
        wasserstein1([0.0, 1.0], [1.0])


def test_w1_against_law(cl, cl_sol):
    law = equilibrium_law(cl_sol, cl)
    x = np.random.default_rng(6).standard_normal(10 ** 5) + 0.2
    assert wasserstein1(x, law) == pytest.approx(0.2, abs=0.01)
    assert wasserstein1(x, stats.norm.cdf) == pytest.approx(0.2, abs=0.01)


def test_monotone_rule():
    assert non_increasing_within([0.1, 0.05, 0.055], [0.002, 0.003, 0.003])
    assert not non_increasing_within([0.05, 0.1], [0.001, 0.001])


def test_exchangeability(rel, rel_sol):
    rng = np.random.default_rng(7)
    snaps = equilibrated_snapshots(rel, rel_sol, 40, 200, rng)
    a = extract_marginal(snaps, 2, rng, "all").samples
    b = extract_marginal([s[::-1] for s in snaps], 2, rng, "all").samples
    assert stats.ks_2samp(a[:, 0] + a[:, 1], b[:, 0] + b[:, 1]).pvalue > 0.01
    assert stats.ks_2samp(a[:, 0], b[:, 1]).pvalue > 0.01


def test_stationarity_refusal():
    snaps = [np.zeros(200), np.ones(200)]
    with pytest.raises(StatisticalTestFailure):
        stationarity_pretest(snaps)


SMALL = Budget(samples=20_000, batches=20)


def test_chaoticity_k1_classical(cl, cl_sol):
    rep = chaoticity_test(cl, cl_sol, [50, 200, 800], 1, SMALL, np.random.default_rng(8))
    assert rep.passed
    _, values, _ = rep.series("ks")
    assert values[-1] < 0.02
    assert {r.metric for r in rep.rows} == {"ks", "w1"}


def test_chaoticity_fails_at_n_equals_k(cl, cl_sol):
    rep = chaoticity_test(cl, cl_sol, [2], 2, Budget(samples=4000, batches=10),
                          np.random.default_rng(9))
    assert not rep.passed
    prod = [r for r in rep.rows if r.metric == "w1_product"][0]
    null = [r for r in rep.rows if r.metric == "w1_null"][0]
    assert prod.value > 5.0 * null.value


def test_chaoticity_rejects_bad_input(cl, cl_sol):
    with pytest.raises(DomainError):
        chaoticity_test(cl, cl_sol, [50, 20], 1, SMALL, np.random.default_rng(0))
    with pytest.raises(DomainError):
        chaoticity_test(cl, cl_sol, [50], 3, SMALL, np.random.default_rng(0))


def test_propagation_at_time_zero(cl):
    rep = propagation_test(cl, uniform_sampler(), [10, 100, 1000], 0.0,
                           Budget(mf_particles=20_000), np.random.default_rng(10))
    _, w1, _ = rep.series("w1")
    assert w1[-1] < w1[0]
    assert rep.passed


def test_propagation_equilibrium_noise_floor(rel, rel_sol):
    f0 = equilibrium_sampler(rel_sol, rel)
    rep = propagation_test(rel, f0, [20, 200], 1.0, Budget(mf_particles=20_000),
                           np.random.default_rng(11))
    # both sides at equilibrium: two-sample KS within its 99.9% null bound
    n = 20_000
    ks2 = [r.value for r in rep.rows if r.metric == "ks2"]
    assert all(d < 1.95 * math.sqrt(2.0 / n) for d in ks2)
    assert rep.passed


def test_marginal_type():
    m = EmpiricalMarginal(2, [[1, 2], [3, 4]])
    assert len(m) == 2
    assert m.projection([1, -1]).tolist() == [-1.0, -1.0]
