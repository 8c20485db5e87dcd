"""Empirical marginals, distribution distances and chaos diagnostics.

A family of N-particle laws is f-chaotic when its k-marginals converge
weakly to the k-fold product of f.  The tests here measure that through
one-dimensional projections:

* ``chaoticity_test`` with k = 1 compares the pooled one-particle marginal of
  an equilibrated walk with the limit density; with k = 2 it compares the
  laws of ``v1 + v2`` and ``v1 - v2`` against surrogates in which the second
  coordinate is re-paired at random (the product of the marginals).
* ``propagation_test`` compares the one-particle marginal of walks started
  from rescaled i.i.d. draws with the mean-field ensemble at the same time.

Convergence in N is asserted as "non-increasing within 2 pooled standard
errors" and a threshold at the largest N.  Standard errors come from batch
statistics over contiguous (hence nearly independent) blocks of the pool.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .energy import EnergyFunction
from .equilibrium import SaddleSolution, equilibrium_law
from .errors import DomainError, StatisticalTestFailure
from .kacwalk import Snapshot, init_from_velocities, init_microcanonical, run_collisions, simulate
from .meanfield import mf_solve


@dataclass
class EmpiricalMarginal:
    k: int
    samples: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, self.k)
        if self.k < 1:
            raise DomainError("marginal order must be >= 1")

    def __len__(self):
        return len(self.samples)

    def projection(self, coeffs):
        return self.samples @ np.asarray(coeffs, dtype=float)


@dataclass
class DistanceReport:
    ks: float
    w1: float
    sample_sizes: tuple
    threshold_pass: bool


def _as_state_array(s):
    if isinstance(s, Snapshot):
        return np.asarray(s.velocities)
    return np.asarray(getattr(s, "velocities", s))


def extract_marginal(states, k: int, rng, per_snapshot=1, source=None) -> EmpiricalMarginal:
    """Pool k-tuples from each snapshot.

    Each snapshot contributes ``per_snapshot`` disjoint k-subsets of particle
    indices, freshly drawn uniformly at random (``"all"`` uses ``N // k``).
    The tuple order is random, so the result is exchangeable by construction.
    """
    out = []
    for s in states:
        v = _as_state_array(s)
        N = v.shape[0]
        if k > N:
            raise DomainError(f"k={k} exceeds N={N}")
        m = N // k if per_snapshot == "all" else int(per_snapshot)
        if m * k > N:
            raise DomainError("not enough particles for the requested disjoint tuples")
        idx = rng.permutation(N)[: m * k].reshape(m, k)
        out.append(v[idx])
    samples = np.concatenate(out) if out else np.empty((0, k))
    return EmpiricalMarginal(k, samples.reshape(-1, k), dict(source or {}))


def _one_dim(m):
    if isinstance(m, EmpiricalMarginal):
        if m.k != 1:
            raise DomainError("need a one-dimensional marginal")
        return m.samples[:, 0]
    return np.asarray(m, dtype=float).ravel()


def ks_distance(m, cdf) -> float:
    """Kolmogorov-Smirnov distance ``sup |F_n - F|`` by the exact sorted-sample formula."""
    x = np.sort(_one_dim(m))
    n = len(x)
    if n == 0:
        raise DomainError("empty sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def _quantiles_from_cdf(cdf, u):
    lo, hi = -1.0, 1.0
    while float(cdf(lo)) > u.min():
        lo *= 2.0
    while float(cdf(hi)) < u.max():
        hi *= 2.0
    a = np.full_like(u, lo)
    b = np.full_like(u, hi)
    for _ in range(80):
        mid = 0.5 * (a + b)
        below = np.asarray(cdf(mid)) < u
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def wasserstein1(samples_a, samples_b_or_cdf, grid: int = 10_000) -> float:
    """Wasserstein-1 distance on the line.

    Against an equal-size sample: ``mean |a_(i) - b_(i)|``.  Against a law
    (an object with ``ppf`` or a CDF callable): quantile coupling on ``grid``
    midpoints.
    """
    a = np.sort(_one_dim(samples_a))
    if len(a) == 0:
        raise DomainError("empty sample")
    other = samples_b_or_cdf
    if callable(other) or hasattr(other, "ppf"):
        u = (np.arange(grid) + 0.5) / grid
        qa = a[np.minimum((u * len(a)).astype(int), len(a) - 1)]
        qb = other.ppf(u) if hasattr(other, "ppf") else _quantiles_from_cdf(other, u)
        return float(np.mean(np.abs(qa - qb)))
    b = np.sort(_one_dim(other))
    if len(a) != len(b):
        raise DomainError(f"sample sizes differ ({len(a)} vs {len(b)})")
    return float(np.mean(np.abs(a - b)))


def distance_report(sample, law, ks_threshold=0.01) -> DistanceReport:
    x = _one_dim(sample)
    ks = ks_distance(x, law.cdf)
    return DistanceReport(ks=ks, w1=wasserstein1(x, law), sample_sizes=(len(x),),
                          threshold_pass=ks < ks_threshold)


# -- reporting ---------------------------------------------------------------

REPORT_HEADER = ("test", "energy", "N", "k", "t", "metric", "value", "stderr", "pass")


@dataclass
class ReportRow:
    test: str
    energy: str
    N: int
    k: int
    t: float
    metric: str
    value: float
    stderr: float
    passed: bool

    def as_tuple(self):
        return (self.test, self.energy, self.N, self.k, self.t, self.metric, self.value,
                self.stderr, self.passed)


@dataclass
class ChaosReport:
    test: str
    energy: str
    rows: list
    passed: bool
    primary_metric: str

    def series(self, metric=None):
        metric = metric or self.primary_metric
        rows = [r for r in self.rows if r.metric == metric]
        return ([r.N for r in rows], [r.value for r in rows], [r.stderr for r in rows])


def non_increasing_within(values, stderrs, factor=2.0) -> bool:
    """True if every step ``d[i+1] - d[i]`` stays below ``factor`` combined standard errors."""
    for (d0, s0), (d1, s1) in zip(zip(values, stderrs), zip(values[1:], stderrs[1:])):
        if d1 - d0 > factor * math.hypot(s0, s1):
            return False
    return True


@dataclass
class Budget:
    """Sample sizes for the N-sweep tests.

    ``samples`` pooled tuples (or particles) per N, split into ``batches``
    blocks for standard errors; snapshots are ``sweeps * N`` collisions apart;
    ``burn_in`` defaults to 100 N collisions.
    """

    samples: int = 100_000
    batches: int = 20
    sweeps: float = 1.0
    burn_in: Optional[int] = None
    mf_particles: int = 100_000
    mf_dt: float = 0.01


def _pooled(stat, xs, batches):
    """Pooled statistic and its standard error from contiguous batches."""
    value = stat(*xs)
    parts = [np.array_split(x, batches) for x in xs]
    vals = np.array([stat(*p) for p in zip(*parts)])
    return value, float(vals.std(ddof=1) / math.sqrt(batches))


def _product_w1(a, b, perm_key):
    """Mean W1 of ``a +/- b`` against ``a +/- b[perm]`` (independent re-pairing)."""
    rng = np.random.default_rng(perm_key)
    p = rng.permutation(len(b))
    return 0.5 * (wasserstein1(a + b, a + b[p]) + wasserstein1(a - b, a - b[p]))


def _null_w1(a, b, perm_key):
    rng = np.random.default_rng(perm_key)
    p, q = rng.permutation(len(b)), rng.permutation(len(b))
    return 0.5 * (wasserstein1(a + b[q], a + b[p]) + wasserstein1(a - b[q], a - b[p]))


def equilibrated_snapshots(e, sol, N, count, rng, sweeps=1.0, burn_in=None,
                           correction="metropolis"):
    burn_in = 100 * N if burn_in is None else burn_in
    state = init_microcanonical(e, N, sol, burn_in, rng, correction=correction)
    spacing = max(1, int(round(sweeps * N)))
    snaps = []
    for _ in range(count):
        run_collisions(state, spacing, rng)
        snaps.append(state.velocities)
    return snaps


def stationarity_pretest(snaps, alpha=1e-3):
    """Two-sample KS between the first and last snapshot; refuses if p < alpha."""
    if len(snaps) < 2:
        return 1.0
    p = stats.ks_2samp(snaps[0], snaps[-1]).pvalue
    if p < alpha:
        raise StatisticalTestFailure(f"stationarity pre-test failed (p={p:.2e})")
    return p


def chaoticity_test(e: EnergyFunction, sol: SaddleSolution, N_list, k: int, budget: Budget,
                    rng, ks_threshold: float = 0.02, correction="metropolis") -> ChaosReport:
    """Distance of equilibrium k-marginals (k = 1 or 2) from product form as N grows."""
    if k not in (1, 2):
        raise DomainError("k must be 1 or 2")
    N_list = list(N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise DomainError("N_list must be increasing")
    law = equilibrium_law(sol, e)
    rows, values, errs, final_ok = [], [], [], False
    children = rng.spawn(len(N_list))
    metric = "ks" if k == 1 else "w1_product"
    for N, child in zip(N_list, children):
        per = N // k
        count = int(math.ceil(budget.samples / per))
        snaps = equilibrated_snapshots(e, sol, N, count, child, budget.sweeps, budget.burn_in,
                                       correction)
        stationarity_pretest(snaps)
        tuples = extract_marginal(snaps, k, child, per_snapshot="all").samples[: budget.samples]
        B = budget.batches
        if k == 1:
            x = tuples[:, 0]
            value, se = _pooled(lambda z: ks_distance(z, law.cdf), [x], B)
            w1, w1_se = _pooled(lambda z: wasserstein1(z, law), [x], B)
            ok = value < ks_threshold
            rows += [ReportRow("chaoticity", e.name, N, k, 0.0, "ks", value, se, ok),
                     ReportRow("chaoticity", e.name, N, k, 0.0, "w1", w1, w1_se, ok)]
        else:
            a, b = tuples[:, 0], tuples[:, 1]
            key = int(child.integers(2 ** 63))
            value, se = _pooled(lambda x, y: _product_w1(x, y, key), [a, b], B)
            null, null_se = _pooled(lambda x, y: _null_w1(x, y, key), [a, b], B)
            ok = value <= null + 3.0 * math.hypot(se, null_se)
            rows += [ReportRow("chaoticity", e.name, N, k, 0.0, "w1_product", value, se, ok),
                     ReportRow("chaoticity", e.name, N, k, 0.0, "w1_null", null, null_se, ok)]
        values.append(value)
        errs.append(se)
        final_ok = ok
    passed = non_increasing_within(values, errs) and final_ok
    return ChaosReport("chaoticity", e.name, rows, passed, metric)


def propagation_test(e: EnergyFunction, f0_sampler, N_list, t: float, budget: Budget, rng,
                     w1_threshold: float = 0.05, correction="metropolis",
                     reference=None) -> ChaosReport:
    """Walk one-marginals at time t against a mean-field ensemble, for each N.

    Each chain starts from N i.i.d. draws of ``f0_sampler`` rescaled onto
    ``sum phi = N``.  Chains are added until ``budget.mf_particles`` velocities
    are pooled, so the two-sample W1 compares equal-size samples.
    """
    N_list = list(N_list)
    mf_rng, *children = rng.spawn(len(N_list) + 1)
    if reference is None:
        reference = mf_solve(e, f0_sampler, budget.mf_particles, t, mf_rng, dt=budget.mf_dt,
                             correction=correction).particles
    M = len(reference)
    rows, values, errs, final_ok = [], [], [], False
    for N, child in zip(N_list, children):
        chains = int(math.ceil(M / N))
        pool = []
        for _ in range(chains):
            state = init_from_velocities(e, f0_sampler(child, N), correction=correction)
            if t > 0:
                simulate(state, t, child)
            pool.append(state.velocities)
        x = np.concatenate(pool)[:M]
        value, se = _pooled(wasserstein1, [x, reference], budget.batches)
        ks2 = float(stats.ks_2samp(x, reference).statistic)
        ok = value < w1_threshold
        rows += [ReportRow("propagation", e.name, N, 1, t, "w1", value, se, ok),
                 ReportRow("propagation", e.name, N, 1, t, "ks2", ks2, math.nan, ok)]
        values.append(value)
        errs.append(se)
        final_ok = ok
    passed = non_increasing_within(values, errs) and final_ok
    return ChaosReport("propagation", e.name, rows, passed, "w1")
