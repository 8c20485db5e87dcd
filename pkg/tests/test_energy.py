import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kacchaos.energy import (check_exponential_bound, from_callable, from_table, get_energy, phi,
                             phi_inverse, read_table, validate_conditions, validate_weight,
                             weight_f)
from kacchaos.errors import DomainError

GRID = np.logspace(-6, 3, 200)


def test_phi_values(cl, rel):
    assert phi(cl, 2.0) == 4.0
    assert phi(rel, 0.0) == 0.0
    assert phi(rel, math.sqrt(3.0)) == pytest.approx(1.0, rel=1e-15)


def test_phi_inverse_values(cl, rel):
    assert phi_inverse(cl, 9.0) == 3.0
    assert phi_inverse(rel, 1.0) == pytest.approx(math.sqrt(3.0), rel=1e-15)
    assert phi_inverse(rel, 0.0) == 0.0


def test_domain_errors(rel):
    with pytest.raises(DomainError):
        phi(rel, math.nan)
    with pytest.raises(DomainError):
        phi(rel, math.inf)
    with pytest.raises(DomainError):
        phi_inverse(rel, -1.0)
    with pytest.raises(DomainError):
        weight_f(rel, math.nan)


def test_weight_values(cl, rel):
    assert weight_f(cl, 3.7) == 0.5
    assert weight_f(rel, 1.0) == pytest.approx(2.0 / math.sqrt(3.0), rel=1e-14)
    assert weight_f(rel, 0.0) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)


def test_relativistic_weight_limit_from_raw_quotient(rel):
    # raw |y| / phi'(phi^{-1}(y^2)) at y = 1e-4, evaluated with plain formulas
    y = 1e-4
    v = math.sqrt((y * y + 1.0) ** 2 - 1.0)
    raw = y / (v / math.sqrt(1.0 + v * v))
    assert raw == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-7)
    assert weight_f(rel, y) == pytest.approx(raw, rel=1e-7)


@pytest.mark.parametrize("name", ["classical", "relativistic"])
def test_invariants_on_grid(name):
    e = get_energy(name)
    v = GRID
    assert np.array_equal(e.phi(v), e.phi(-v))
    assert np.allclose(e.phi_inv(e.phi(v)), v, rtol=1e-10, atol=0)
    y = np.sqrt(e.phi(v))
    assert np.allclose(weight_f(e, y) * np.abs(e.dphi(v)), y, rtol=1e-9)
    assert np.array_equal(weight_f(e, y), weight_f(e, -y))


@pytest.mark.parametrize("name", ["classical", "relativistic"])
def test_round_trip(name):
    e = get_energy(name)
    u = np.logspace(-8, 4, 300)
    assert np.allclose(e.phi(e.phi_inv(u)), u, rtol=1e-10, atol=0)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False))
def test_relativistic_phi_even_and_nonnegative(v):
    e = get_energy("relativistic")
    assert phi(e, v) == phi(e, -v)
    assert phi(e, v) >= 0.0


def test_builtin_conditions_pass(cl, rel):
    for e in (cl, rel):
        rep = validate_conditions(e)
        assert rep.passed, rep.failures()


def test_heavy_weight_fails_bound():
    heavy = lambda y: np.exp(2.0 * np.asarray(y) ** 2)  # noqa: E731
    ok, _, _ = check_exponential_bound(heavy, b=1.9)
    assert not ok
    ok, b, _ = check_exponential_bound(heavy)
    assert b == pytest.approx(2.0, rel=1e-6)
    res = validate_weight(heavy, b=1.9)
    assert not res["bound_ok"]


def test_from_callable_matches_builtin(rel):
    e = from_callable("quartic-ish", lambda v: np.sqrt(1.0 + v * v) - 1.0)
    v = np.array([0.1, 0.5, 1.0, 3.0, 10.0])
    assert not e.analytic_inverse
    assert np.allclose(e.dphi(v), rel.dphi(v), rtol=1e-6)
    assert np.allclose(e.phi_inv(e.phi(v)), v, rtol=1e-12)
    assert validate_conditions(e).passed


def _write(path, rows):
    path.write_text("".join(f"{a},{b}\n" for a, b in rows))
    return path


def test_table_energy(tmp_path):
    v = np.linspace(0.0, 20.0, 401)
    path = _write(tmp_path / "quad.csv", zip(v, v * v))
    e = get_energy(f"table:{path}")
    assert e.phi(np.array(1.5)) == pytest.approx(2.25, rel=1e-4)
    assert e.phi(np.array(-1.5)) == e.phi(np.array(1.5))
    assert validate_conditions(e).passed


def test_non_convex_table_is_reported(tmp_path):
    path = _write(tmp_path / "bad.csv", [(0, 0), (1, 1), (2, 1.5), (3, 4)])
    rep = validate_conditions(from_table(read_table(path)))
    assert not rep.passed
    assert any("convex" in m for m in rep.failures())


def test_unknown_energy():
    with pytest.raises(DomainError):
        get_energy("newtonian")
