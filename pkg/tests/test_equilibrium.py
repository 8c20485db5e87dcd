import math

import numpy as np
import pytest
from scipy import special

from kacchaos.energy import from_callable, get_energy
from kacchaos.equilibrium import (PREFACTORS, energy_moment, equilibrium_cdf, equilibrium_law,
                                  equilibrium_pdf, increasing_saddle_function,
                                  sample_equilibrium_1d, select_prefactor, solve_z0, z_asymptotic,
                                  z_bruteforce, z_exact_classical)
from kacchaos.errors import DomainError, ValidationError

# Frozen from independent quadrature (scipy.quad of the saddle equation, 1e-13)
# and the Bessel identity int exp(-z phi) dv = 2 e^z K1(z) for the relativistic energy.
REL_Z0 = 0.7346413168
REL_INTEGRAL = 4.082002956


def normal_cdf_series(x, terms=80):
    """Independent oracle: 1/2 + (1/sqrt(2 pi)) sum (-1)^n x^(2n+1) / (n! 2^n (2n+1))."""
    total, term = 0.0, x
    for n in range(terms):
        total += term / (2 * n + 1)
        term *= -x * x / (2.0 * (n + 1))
    return 0.5 + total / math.sqrt(2.0 * math.pi)


def test_classical_solution(cl_sol):
    assert cl_sol.z0 == pytest.approx(0.5, abs=1e-10)
    assert cl_sol.C == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=1e-10)
    assert cl_sol.Spp_z0 == pytest.approx(2.0, rel=1e-8)
    assert cl_sol.S_z0 == pytest.approx(0.5 + math.log(0.5 * math.sqrt(2.0 * math.pi)), rel=1e-10)


def test_relativistic_solution(rel_sol):
    assert rel_sol.z0 == pytest.approx(0.734641, abs=5e-6)
    assert rel_sol.z0 == pytest.approx(REL_Z0, abs=1e-9)
    assert rel_sol.integral_value == pytest.approx(4.082, abs=5e-3)
    assert rel_sol.integral_value == pytest.approx(REL_INTEGRAL, rel=1e-9)
    bessel = 2.0 * math.exp(rel_sol.z0) * special.k1(rel_sol.z0)
    assert rel_sol.integral_value == pytest.approx(bessel, rel=1e-10)
    assert rel_sol.C == pytest.approx(0.2450, abs=1e-4)


def test_solution_invariants(energy_and_sol):
    e, sol = energy_and_sol
    assert sol.z0 > 0 and sol.Spp_z0 > 0
    assert sol.C * sol.integral_value == pytest.approx(1.0, abs=1e-12)
    assert abs(sol.residual) <= 1e-10
    mean_phi = sol.C * energy_moment(e, sol.z0, 1)
    assert mean_phi == pytest.approx(1.0, abs=1e-8)
    assert sol.Phi_z0 == pytest.approx(sol.integral_value / 2.0, rel=1e-9)


def test_saddle_function_increasing(energy_and_sol):
    e, sol = energy_and_sol
    A = increasing_saddle_function(e)
    xs = np.linspace(sol.z0 / 4.0, 4.0 * sol.z0, 15)
    vals = np.array([A(x) for x in xs])
    assert np.all(np.diff(vals) > 0)


def test_unvalidated_energy_is_refused():
    # sqrt(|v| + 1) - 1 is concave in v, so the gate refuses it
    bad = from_callable("concave", lambda v: np.sqrt(np.abs(v) + 1.0) - 1.0)
    with pytest.raises(ValidationError):
        solve_z0(bad)


def test_pdf_values(cl, cl_sol, rel, rel_sol):
    assert equilibrium_pdf(cl_sol, cl, 0.0) == pytest.approx(0.39894228, abs=1e-8)
    assert equilibrium_pdf(cl_sol, cl, 1.0) == pytest.approx(0.24197072, abs=1e-8)
    assert equilibrium_pdf(rel_sol, rel, 0.0) == pytest.approx(rel_sol.C, rel=1e-15)


def test_cdf_values(cl, cl_sol, rel, rel_sol):
    assert equilibrium_cdf(cl_sol, cl, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert equilibrium_cdf(rel_sol, rel, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert equilibrium_cdf(cl_sol, cl, 1.959964) == pytest.approx(0.975, abs=1e-6)
    for x in (-3.0, -1.2, 0.3, 0.8, 2.5):
        assert equilibrium_cdf(cl_sol, cl, x) == pytest.approx(normal_cdf_series(x), abs=1e-10)
    for e, s in ((cl, cl_sol), (rel, rel_sol)):
        assert equilibrium_cdf(s, e, 1e6) == pytest.approx(1.0, abs=1e-9)
        assert equilibrium_cdf(s, e, -1e6) == pytest.approx(0.0, abs=1e-9)


def test_relativistic_cdf_against_quadrature(rel, rel_sol):
    from scipy import integrate
    for x in (0.4, 1.5, 4.0):
        part, _ = integrate.quad(lambda v: rel_sol.C * math.exp(-rel_sol.z0 * (math.sqrt(1 + v * v) - 1)),
                                 0.0, x, epsabs=1e-13)
        assert equilibrium_cdf(rel_sol, rel, x) == pytest.approx(0.5 + part, abs=1e-10)


def test_ppf_inverts_cdf(energy_and_sol):
    e, sol = energy_and_sol
    law = equilibrium_law(sol, e)
    q = np.array([1e-9, 1e-4, 0.1, 0.5, 0.77, 0.999999])
    assert np.allclose(law.cdf(law.ppf(q)), q, rtol=1e-9, atol=1e-14)


def test_sampler_moments(energy_and_sol):
    e, sol = energy_and_sol
    rng = np.random.default_rng(5)
    x = sample_equilibrium_1d(sol, e, rng, 10 ** 6)
    assert np.mean(e.phi(x)) == pytest.approx(1.0, abs=0.01)
    assert abs(np.mean(x)) < 3.0 * np.std(x) / 1e3
    from kacchaos.chaos import ks_distance
    assert ks_distance(x, lambda v: equilibrium_cdf(sol, e, v)) < 0.002
    if e.name == "classical":
        assert np.var(x) == pytest.approx(1.0, abs=0.01)
    assert isinstance(sample_equilibrium_1d(sol, e, rng), float)


def test_exact_classical_values():
    # N = 3, E = 3: |S^2(sqrt 3)| / (2 sqrt 3) = 4 pi 3 / (2 sqrt 3)
    assert math.exp(z_exact_classical(3).log) == pytest.approx(4 * math.pi * 3 / (2 * math.sqrt(3)),
                                                              rel=1e-13)
    # N = 2: circle length over 2 sqrt E = pi for every E
    assert math.exp(z_exact_classical(2, 7.0).log) == pytest.approx(math.pi, rel=1e-13)


def test_prefactor_arbitration():
    name, errs = select_prefactor()
    assert set(errs) == set(PREFACTORS)
    assert name == "contour"
    assert errs["contour"] < 0.03
    assert sorted(errs.values())[1] > 0.2


@pytest.mark.parametrize("N, tol", [(50, 0.03), (200, 0.01)])
def test_classical_asymptotics(cl, cl_sol, N, tol):
    a = z_asymptotic(cl, N, cl_sol)
    assert abs(math.exp(a.log - z_exact_classical(N).log) - 1.0) <= tol
    assert a.prefactor == "contour"


def test_asymptotics_error_shrinks(cl, cl_sol):
    errs = [abs(math.exp(z_asymptotic(cl, N, cl_sol).log - z_exact_classical(N).log) - 1)
            for N in (10, 50, 200, 1000, 10000)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_asymptotic_needs_N(cl):
    with pytest.raises(DomainError):
        z_asymptotic(cl, 1)


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
def test_bruteforce_classical(cl, N):
    bf = z_bruteforce(cl, N, float(N))
    assert math.exp(bf.log - z_exact_classical(N).log) == pytest.approx(1.0, abs=1e-3)


def test_bruteforce_two_particles_beta(cl):
    # Z_2(E) = 4 int_0^E g(u) g(E-u) du with g = 1/(2 sqrt u): pi for all E
    assert math.exp(z_bruteforce(cl, 2, 2.0).log) == pytest.approx(math.pi, rel=1e-3)


@pytest.mark.parametrize("N", [2, 3])
def test_bruteforce_relativistic_two_grids(rel, N):
    coarse = z_bruteforce(rel, N, float(N), resolution=32)
    fine = z_bruteforce(rel, N, float(N), resolution=64)
    assert abs(math.exp(fine.log - coarse.log) - 1.0) < 5e-3
    # regression pin from the first converged computation
    adaptive = z_bruteforce(rel, N, float(N))
    assert math.exp(adaptive.log - fine.log) == pytest.approx(1.0, abs=1e-6)


def test_relativistic_asymptotic_vs_bruteforce(rel, rel_sol):
    a = z_asymptotic(rel, 4, rel_sol)
    bf = z_bruteforce(rel, 4, 4.0)
    assert abs(math.exp(a.log - bf.log) - 1.0) < 0.25


def test_oracle_gap_shrinks_classical(cl, cl_sol):
    gaps = [abs(z_asymptotic(cl, N, cl_sol).log - z_bruteforce(cl, N, float(N)).log)
            for N in range(2, 9)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_bruteforce_range(rel):
    with pytest.raises(DomainError):
        z_bruteforce(rel, 9, 9.0)
