"""Particle energy functions phi(v) and the induced sphere weight f(y).

An energy is even, convex, vanishes at the origin and increases on v > 0.
The substitution ``y^2 = phi(v)`` (with the sign of v) maps the constant-energy
manifold onto a sphere; the Jacobian weight it introduces is

    f(y) = |y| / |phi'(phi^{-1}(y^2))|.

Two energies are built in: ``classical`` (phi = v^2, f = 1/2) and
``relativistic`` (phi = sqrt(1 + v^2) - 1).  Any other energy can be given as a
callable or as a two-column table of (v, phi(v)) values on v >= 0.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericError
from .numerics import QuadratureSpec, integrate_interval

SMALL_Y = 1e-6
SIGN_QUADRATURE = QuadratureSpec(relative_tolerance=1e-8, absolute_tolerance=1e-12)


@dataclass(frozen=True, eq=False)
class EnergyFunction:
    """An even convex particle energy with its derivative and positive-branch inverse.

    All callables accept and return numpy arrays.  ``weight`` is an optional
    closed form of f(y); ``scalar_weight`` is a plain-float version of it used
    in tight simulation loops; ``constant_weight`` is set when f is constant
    (the classical case), which lets samplers skip acceptance tests entirely.
    """

    name: str
    phi: Callable
    dphi: Callable
    phi_inv: Callable
    analytic_inverse: bool = True
    weight: Optional[Callable] = None
    scalar_weight: Optional[Callable] = None
    constant_weight: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __repr__(self):
        return f"EnergyFunction({self.name!r})"

    def weight_scalar(self, y: float) -> float:
        if self.constant_weight is not None:
            return self.constant_weight
        if self.scalar_weight is not None:
            return self.scalar_weight(y)
        return float(weight_f(self, y))


def _check_finite(x, what):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} must be finite")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def phi(e: EnergyFunction, v):
    """Energy of a particle with velocity ``v`` (scalar or array)."""
    arr = _check_finite(v, "velocity")
    return _out(np.asarray(e.phi(arr), dtype=float), v)


def phi_inverse(e: EnergyFunction, u):
    """The unique ``v >= 0`` with ``phi(v) = u``."""
    arr = _check_finite(u, "energy")
    if np.any(arr < 0):
        raise DomainError("phi_inverse needs u >= 0")
    return _out(np.asarray(e.phi_inv(arr), dtype=float), u)


def weight_f(e: EnergyFunction, y):
    """Sphere weight ``f(y) = |y| / |phi'(phi^{-1}(y^2))|``, even in y.

    The quotient is 0/0 at y = 0 whenever phi'(0) = 0; below ``|y| < 1e-6`` the
    value at ``|y| = 1e-6`` is used as the limit.
    """
    arr = np.abs(_check_finite(y, "y"))
    if e.constant_weight is not None:
        return _out(np.full_like(arr, e.constant_weight, dtype=float), y)
    if e.weight is not None:
        return _out(np.asarray(e.weight(arr), dtype=float), y)
    ys = np.maximum(arr, SMALL_Y)
    v = np.asarray(e.phi_inv(ys * ys), dtype=float)
    slope = np.abs(np.asarray(e.dphi(v), dtype=float))
    return _out(ys / slope, y)


# -- built-in energies -------------------------------------------------------

def classical() -> EnergyFunction:
    """phi(v) = v^2."""
    return EnergyFunction(
        name="classical",
        phi=lambda v: v * v,
        dphi=lambda v: 2.0 * v,
        phi_inv=np.sqrt,
        weight=lambda y: np.full_like(np.asarray(y, dtype=float), 0.5),
        scalar_weight=lambda y: 0.5,
        constant_weight=0.5,
        meta=dict(scalar_phi=lambda v: v * v, scalar_dphi=lambda v: 2.0 * v, quadratic=1.0),
    )


def _rel_phi(v):
    v2 = v * v
    # sqrt(1+v^2) - 1 without cancellation near v = 0
    return v2 / (np.sqrt(1.0 + v2) + 1.0)


def _rel_weight(y):
    y2 = y * y
    return (y2 + 1.0) / np.sqrt(y2 + 2.0)


def _rel_weight_scalar(y):
    y2 = y * y
    return (y2 + 1.0) / math.sqrt(y2 + 2.0)


def relativistic() -> EnergyFunction:
    """phi(v) = sqrt(1 + v^2) - 1 in units where mass and light speed are one."""
    return EnergyFunction(
        name="relativistic",
        phi=_rel_phi,
        dphi=lambda v: v / np.sqrt(1.0 + v * v),
        phi_inv=lambda u: np.sqrt(u * (u + 2.0)),
        weight=_rel_weight,
        scalar_weight=_rel_weight_scalar,
        meta=dict(scalar_phi=lambda v: v * v / (math.sqrt(1.0 + v * v) + 1.0),
                  scalar_dphi=lambda v: v / math.sqrt(1.0 + v * v)),
    )


BUILTIN = {"classical": classical, "relativistic": relativistic}


# -- user supplied energies --------------------------------------------------

def _central_difference(phi_fn):
    def dphi(v):
        v = np.asarray(v, dtype=float)
        h = np.maximum(1e-6, 1e-6 * np.abs(v))
        return (phi_fn(v + h) - phi_fn(v - h)) / (2.0 * h)

    return dphi


def _bisection_inverse(phi_fn, max_iter=200):
    def inv(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        for _ in range(2100):
            grow = phi_fn(hi) < u
            if not grow.any():
                break
            hi = np.where(grow, 2.0 * hi, hi)
        else:
            raise NumericError("could not bracket phi^{-1}; energy does not grow")
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            below = phi_fn(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-15 * hi + 1e-300):
                break
        root = 0.5 * (lo + hi)
        resid = np.abs(phi_fn(root) - u)
        bad = resid > 1e-12 * np.maximum(u, 1e-300) + 1e-300
        if np.any(bad & (hi - lo > 1e-15 * hi + 1e-300)):
            raise NumericError("bisection for phi^{-1} did not converge", float(resid.max()))
        root[u == 0] = 0.0
        return root

    def wrapper(u):
        out = inv(u)
        return out if np.ndim(u) else out[0]

    return wrapper


def from_callable(name: str, phi_fn: Callable, dphi_fn: Optional[Callable] = None,
                  weight_fn: Optional[Callable] = None) -> EnergyFunction:
    """Wrap a user energy.  ``phi_fn`` must accept arrays.

    The derivative defaults to central differences with step
    ``max(1e-6, 1e-6 |v|)`` and the inverse to bisection on v >= 0.
    """
    even_phi = lambda v: phi_fn(np.abs(np.asarray(v, dtype=float)))  # noqa: E731
    return EnergyFunction(
        name=name,
        phi=even_phi,
        dphi=dphi_fn or _central_difference(even_phi),
        phi_inv=_bisection_inverse(even_phi),
        analytic_inverse=False,
        weight=weight_fn,
    )


def read_table(path):
    """Read a two-column (v, phi) CSV; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for k, rec in enumerate(csv.reader(fh)):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError):
                if k == 0:
                    continue
                raise DomainError(f"{path}: malformed row {k + 1}: {rec!r}")
    if len(rows) < 3:
        raise DomainError(f"{path}: need at least three (v, phi) rows")
    return np.array(rows)


def from_table(table, name: Optional[str] = None) -> EnergyFunction:
    """Energy interpolated from tabulated (v, phi(v)) pairs on a v >= 0 grid.

    ``table`` is a path to a two-column CSV or an (n, 2) array.  The profile
    is interpolated by a monotone cubic, mirrored to v < 0 by evenness and
    continued linearly with the end slope beyond the last node.  Shape
    conditions (phi(0) = 0, convexity) are not enforced here; they are
    reported by :func:`validate_conditions`.
    """
    if isinstance(table, (str, bytes)) or hasattr(table, "__fspath__"):
        data = read_table(table)
        name = name or f"table:{table}"
    else:
        data = np.asarray(table, dtype=float)
        name = name or "table"
    v, p = data[:, 0], data[:, 1]
    if np.any(v < 0) or np.any(np.diff(v) <= 0):
        raise DomainError("table v grid must be strictly increasing with v >= 0")
    interp = PchipInterpolator(v, p, extrapolate=False)
    dinterp = interp.derivative()
    v_end, p_end = v[-1], p[-1]
    s_end = float(dinterp(v_end))

    def profile(x):
        x = np.asarray(x, dtype=float)
        inside = np.minimum(x, v_end)
        out = np.asarray(interp(inside), dtype=float)
        return np.where(x > v_end, p_end + s_end * (x - v_end), out)

    def slope(x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        out = np.where(a > v_end, s_end, np.asarray(dinterp(np.minimum(a, v_end)), dtype=float))
        return np.sign(x) * out

    e = from_callable(name, profile, slope)
    e.meta.update(table_v=v, table_phi=p)
    return e


def get_energy(spec) -> EnergyFunction:
    """Resolve ``'classical'``, ``'relativistic'`` or ``'table:<path>'``."""
    if isinstance(spec, EnergyFunction):
        return spec
    if spec in BUILTIN:
        return BUILTIN[spec]()
    if isinstance(spec, str) and spec.startswith("table:"):
        return from_table(spec[len("table:"):])
    raise DomainError(f"unknown energy {spec!r}; expected classical, relativistic or table:<path>")


# -- condition checks --------------------------------------------------------

@dataclass
class ConditionReport:
    """Outcome of :func:`validate_conditions`.  Failures are recorded, never raised."""

    name: str
    shape_ok: bool
    shape_messages: list
    bound_ok: bool
    bound_b: float
    bound_K: float
    full_integral: float
    full_ok: bool
    unit_integral: float
    unit_ok: bool

    @property
    def passed(self) -> bool:
        return self.shape_ok and self.bound_ok and self.full_ok and self.unit_ok

    def failures(self):
        out = list(self.shape_messages)
        if not self.bound_ok:
            out.append(f"f(y) <= K exp(b y^2) fails (b={self.bound_b:.4g})")
        if not self.full_ok:
            out.append(f"integral of (1-y^2) f over R is not negative ({self.full_integral:.4g})")
        if not self.unit_ok:
            out.append(f"integral of (1-y^2) f over |y|<=1 is not positive ({self.unit_integral:.4g})")
        return out


def check_shape(e: EnergyFunction, grid=None):
    """Evenness, phi(0) = 0, strict increase and convexity on a test grid."""
    msgs = []
    if grid is None:
        grid = np.concatenate([[0.0], np.logspace(-3, 2, 241)])
    v = np.asarray(grid, dtype=float)
    p = np.asarray(e.phi(v), dtype=float)
    pm = np.asarray(e.phi(-v), dtype=float)
    scale = np.maximum(np.abs(p), 1e-300)
    if np.any(np.abs(p - pm) > 1e-12 * scale + 1e-15):
        msgs.append("phi is not even")
    if abs(float(e.phi(np.array(0.0)))) > 1e-12:
        msgs.append("phi(0) != 0")
    if np.any(np.asarray(e.dphi(v[v > 0]), dtype=float) <= 0):
        msgs.append("phi is not strictly increasing on v > 0")
    # convexity via second divided differences on the (non-uniform) grid
    if "table_v" in e.meta:
        tv, tp = e.meta["table_v"], e.meta["table_phi"]
        slopes = np.diff(tp) / np.diff(tv)
        if np.any(np.diff(slopes) < -1e-9 * np.maximum(1.0, np.abs(slopes[1:]))):
            msgs.append("tabulated phi is not convex")
    slopes = np.diff(p) / np.diff(v)
    if np.any(np.diff(slopes) < -1e-7 * np.maximum(1.0, np.abs(slopes[1:]))):
        if "phi is not convex" not in msgs and "tabulated phi is not convex" not in msgs:
            msgs.append("phi is not convex")
    return not msgs, msgs


def check_exponential_bound(f, b=None, y_max=10.0, n=401):
    """Heuristic check of ``f(y) <= K exp(b y^2)``.

    With ``b=None`` the exponent is the (non-negative) least-squares slope of
    ``log f`` against ``y^2`` on ``[0, y_max]``.  ``K`` is the maximum of
    ``f exp(-b y^2)`` there, and the bound is then tested out of sample on
    ``[y_max, 1.5 y_max]``.  Returns ``(ok, b, K)``.
    """
    ys = np.linspace(0.0, y_max, n)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        fy = np.asarray(f(ys), dtype=float)
        logf = np.log(fy)
    good = np.isfinite(logf)
    if b is None:
        if good.sum() < 3:
            return False, math.nan, math.nan
        slope = np.polyfit(ys[good] ** 2, logf[good], 1)[0]
        b = max(float(slope), 0.0) * (1.0 + 1e-9)
    logK = np.max(logf[good] - b * ys[good] ** 2)
    ext = np.linspace(y_max, 1.5 * y_max, n // 2)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        logf_ext = np.log(np.asarray(f(ext), dtype=float))
    ok = bool(np.all(np.isfinite(logf_ext)) and np.all(logf_ext - b * ext ** 2 <= logK + 1e-9))
    return ok, float(b), float(math.exp(logK)) if logK < 700 else math.inf


def _signed_integral(g, a, b, spec):
    """``int_a^b g`` where only the sign matters: NaN unless the sign is resolved."""
    val, err = integrate_interval(g, a, b, spec, return_error=True)
    return val if np.isfinite(val) and abs(val) > err else math.nan


def validate_weight(f, name="weight", b=None, y_max=10.0, spec=None):
    """Run the growth and sign conditions on an arbitrary weight ``f``.

    Only signs are needed, so an integral is accepted once its magnitude
    exceeds the quadrature error estimate; this tolerates piecewise-cubic
    (tabulated) weights that do not reach the strict tolerances.
    """
    spec = spec or SIGN_QUADRATURE
    bound_ok, b, K = check_exponential_bound(f, b=b, y_max=y_max)
    g = lambda y: (1.0 - y * y) * np.asarray(f(y), dtype=float)  # noqa: E731
    unit = 2.0 * _signed_integral(g, 0.0, 1.0, spec)
    # Beyond |y| = 1 the integrand is non-positive, so a negative truncated
    # integral already settles the sign of the full one.
    full, Y = math.nan, y_max
    for _ in range(5):
        full = 2.0 * _signed_integral(g, 0.0, Y, spec)
        if full < 0:
            break
        Y *= 2.0
    return dict(name=name, bound_ok=bound_ok, bound_b=b, bound_K=K, full_integral=full,
                full_ok=bool(full < 0), unit_integral=unit, unit_ok=bool(unit > 0))


def validate_conditions(e: EnergyFunction, b=None, y_max=10.0, spec=None) -> ConditionReport:
    """Check the shape of phi and the growth/sign conditions on its weight f."""
    shape_ok, msgs = check_shape(e)
    res = validate_weight(lambda y: weight_f(e, y), name=e.name, b=b, y_max=y_max, spec=spec)
    return ConditionReport(shape_ok=shape_ok, shape_messages=msgs, **res)
