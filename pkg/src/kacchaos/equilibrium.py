"""Chaotic limit density C exp(-z0 phi(v)) and the asymptotics of the partition function.

``solve_z0`` finds the unique positive root of

    int (1 - phi(v)) exp(-z0 phi(v)) dv = 0,

i.e. the inverse temperature at which the mean particle energy is one.  The
same saddle point controls the large-N behaviour of the microcanonical
partition function Z_phi(sqrt N), evaluated here both by the saddle-point
formula (``z_asymptotic``) and, for small N, by an independent N-fold
convolution (``z_bruteforce``).
"""

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator, CubicHermiteSpline
from scipy.special import gammaln, roots_jacobi

from . import numerics
from .energy import EnergyFunction, validate_conditions, weight_f
from .errors import DomainError, ValidationError
from .numerics import LogValue, QuadratureSpec, SaddleInput

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class SaddleSolution:
    """Equilibrium fingerprint of an energy.

    ``integral_value`` is ``int exp(-z0 phi(v)) dv`` and ``C`` its reciprocal.
    ``Phi_z0`` is the weight transform ``int exp(-z0 y^2) f(y) dy`` (which
    equals ``integral_value / 2``), ``S_z0 = z0 + log Phi_z0`` and ``Spp_z0``
    is the second derivative of S at the saddle.
    """

    name: str
    z0: float
    C: float
    integral_value: float
    Phi_z0: float
    Spp_z0: float
    S_z0: float
    residual: float = 0.0
    bound_b: float = 0.0
    bound_K: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def as_row(self):
        return dict(name=self.name, z0=self.z0, C=self.C, integral_value=self.integral_value,
                    Phi_z0=self.Phi_z0, Spp_z0=self.Spp_z0)


def _v_tail(e, rate, k=0):
    factory = lambda r: numerics.convex_exponential_tail_bound(r, e.phi, e.dphi)  # noqa: E731
    return numerics.with_power(factory, rate, k)


def energy_moment(e: EnergyFunction, xi: float, k: int = 0, spec: QuadratureSpec = None) -> float:
    """``int phi(v)^k exp(-xi phi(v)) dv`` over the real line."""
    spec = spec or QuadratureSpec()
    spec = QuadratureSpec(spec.relative_tolerance, spec.absolute_tolerance, _v_tail(e, xi, k))

    def g(v):
        p = e.phi(v)
        return p ** k * np.exp(-xi * p)

    return numerics.integrate_even_line(g, spec)


def weight_moment(e: EnergyFunction, z: float, k: int, K: float, b: float,
                  spec: QuadratureSpec = None) -> float:
    """``int y^(2k) exp(-z y^2) f(y) dy`` using the growth bound ``f <= K e^{b y^2}``."""
    spec = spec or QuadratureSpec()
    gap = z - b
    factory = lambda r: numerics.gaussian_tail_bound(K, z - r, z)  # noqa: E731
    tail = numerics.with_power(factory, gap, k)
    spec = QuadratureSpec(spec.relative_tolerance, spec.absolute_tolerance, tail)

    def g(y):
        return y ** (2 * k) * np.exp(-z * y * y) * weight_f(e, y)

    return numerics.integrate_even_line(g, spec)


def increasing_saddle_function(e: EnergyFunction, spec: QuadratureSpec = None):
    """The map ``xi -> e^xi/2 * int (1 - phi) e^{-xi phi} dv``, increasing in xi.

    Written in y variables this is ``int e^{-xi (y^2 - 1)} (1 - y^2) f(y) dy``;
    its derivative is a positive integral, so it has at most one root.
    """

    def A(xi):
        m0 = energy_moment(e, xi, 0, spec)
        m1 = energy_moment(e, xi, 1, spec)
        return 0.5 * math.exp(xi) * (m0 - m1)

    return A


def solve_z0(e: EnergyFunction, spec: QuadratureSpec = None, report=None) -> SaddleSolution:
    """Solve for the saddle point z0 and assemble the full :class:`SaddleSolution`.

    Raises :class:`ValidationError` if the energy fails :func:`validate_conditions`.
    """
    report = report or validate_conditions(e)
    if not report.passed:
        raise ValidationError(f"energy {e.name!r} fails: " + "; ".join(report.failures()), report)
    A = increasing_saddle_function(e, spec)
    z0 = numerics.find_root_increasing(A, (1e-3, 1.0), positive=True)
    if not z0 > report.bound_b:
        raise ValidationError(f"saddle z0={z0:.6g} does not exceed the growth exponent "
                              f"b={report.bound_b:.6g}", report)
    m0 = energy_moment(e, z0, 0, spec)
    m1 = energy_moment(e, z0, 1, spec)
    K, b = report.bound_K, report.bound_b
    w0 = weight_moment(e, z0, 0, K, b, spec)
    w1 = weight_moment(e, z0, 1, K, b, spec)
    w2 = weight_moment(e, z0, 2, K, b, spec)
    spp = w2 / w0 - (w1 / w0) ** 2
    return SaddleSolution(name=e.name, z0=z0, C=1.0 / m0, integral_value=m0, Phi_z0=w0,
                          Spp_z0=spp, S_z0=z0 + math.log(w0), residual=(m0 - m1) / m0,
                          bound_b=b, bound_K=K)


# -- the limit density -------------------------------------------------------

class EquilibriumLaw:
    """Density, CDF, quantile and sampler for ``C exp(-z0 phi(v))``.

    The CDF is tabulated once: per-cell Gauss-Legendre sums give the
    cumulative mass at cell edges, and a cubic Hermite spline with the exact
    density as slope interpolates between them.
    """

    def __init__(self, sol: SaddleSolution, e: EnergyFunction, cells: int = 4096):
        self.sol, self.energy = sol, e
        tail = _v_tail(e, sol.z0)
        V = 1.0
        while sol.C * tail(V) > 1e-16 and V < 2.0 ** 24:
            V *= 1.25
        self.v_max = V
        edges = np.linspace(0.0, V, cells + 1)
        xg, wg = np.polynomial.legendre.leggauss(8)
        h = np.diff(edges)
        mids = 0.5 * (edges[:-1] + edges[1:])
        pts = mids[:, None] + 0.5 * h[:, None] * xg[None, :]
        mass = (self.pdf(pts) * wg[None, :]).sum(axis=1) * 0.5 * h
        half = np.concatenate([[0.0], np.cumsum(mass)])
        self.tabulated_half_mass = float(half[-1])
        half = 0.5 * half / half[-1]
        self._edges = edges
        self._half = CubicHermiteSpline(edges, half, self.pdf(edges) * (0.5 / self.tabulated_half_mass))
        keep = np.concatenate([[True], np.diff(half) > 0])
        self._inv_x, self._inv_g = edges[keep], half[keep]

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        return self.sol.C * np.exp(-self.sol.z0 * self.energy.phi(v))

    def _half_cdf(self, x):
        x = np.minimum(np.abs(x), self.v_max)
        return self._half(x)

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        return 0.5 + np.sign(v) * self._half_cdf(v)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        t = np.abs(q - 0.5)
        x = np.interp(t, self._inv_g, self._inv_x)
        for _ in range(3):
            dens = self.pdf(x) * (0.5 / self.tabulated_half_mass)
            step = np.where(dens > 0, (self._half_cdf(x) - t) / np.maximum(dens, 1e-300), 0.0)
            x = np.clip(x - step, 0.0, self.v_max)
        return np.where(q < 0.5, -x, x)

    def sample(self, rng, size=None):
        return self.ppf(rng.random(size))


_LAWS = weakref.WeakKeyDictionary()


def equilibrium_law(sol: SaddleSolution, e: EnergyFunction) -> EquilibriumLaw:
    per_energy = _LAWS.setdefault(e, {})
    if sol.z0 not in per_energy:
        per_energy[sol.z0] = EquilibriumLaw(sol, e)
    return per_energy[sol.z0]


def equilibrium_pdf(sol: SaddleSolution, e: EnergyFunction, v):
    out = sol.C * np.exp(-sol.z0 * np.asarray(e.phi(np.asarray(v, dtype=float))))
    return float(out) if np.ndim(v) == 0 else out


def equilibrium_cdf(sol: SaddleSolution, e: EnergyFunction, v):
    out = equilibrium_law(sol, e).cdf(v)
    return float(out) if np.ndim(v) == 0 else out


def sample_equilibrium_1d(sol: SaddleSolution, e: EnergyFunction, rng, size=None):
    """Inverse-CDF draws from ``C exp(-z0 phi(v))``."""
    out = equilibrium_law(sol, e).sample(rng, size)
    return float(out) if size is None else out


# -- partition function ------------------------------------------------------

def log_sphere_area(n: int, radius: float) -> float:
    """log of the surface area of the sphere S^{n-1}(radius) in R^n."""
    return LOG2 + 0.5 * n * math.log(math.pi) + (n - 1) * math.log(radius) - gammaln(0.5 * n)


def z_exact_classical(N: int, E: float = None) -> LogValue:
    """Exact Z for phi = v^2: sphere area |S^{N-1}(sqrt E)| over |grad H| = 2 sqrt E."""
    E = float(N if E is None else E)
    return LogValue(log_sphere_area(N, math.sqrt(E)) - math.log(2.0 * math.sqrt(E)))


PREFACTORS = ("contour", "lemma", "proof")


def _log_prefactor(kind, N, sol):
    """Log of Z's leading term for each candidate normalization.

    ``contour`` evaluates ``2^{N-1}/(pi i)`` times the saddle integral along the
    vertical line through z0 (dz = i d eta); ``lemma`` and ``proof`` are the
    closed forms ``2^{N-1} e^{N S}/sqrt(N S'')`` and ``2^N e^{N S}/sqrt(N S'')``.
    """
    if kind == "contour":
        lead = numerics.saddle_asymptotic_1d(SaddleInput(N, sol.S_z0, sol.Spp_z0), log=True)
        return (N - 1) * LOG2 - math.log(math.pi) + lead.log
    base = N * sol.S_z0 - 0.5 * math.log(N * sol.Spp_z0)
    if kind == "lemma":
        return (N - 1) * LOG2 + base
    if kind == "proof":
        return N * LOG2 + base
    raise DomainError(f"unknown prefactor {kind!r}")


_SELECTED = {}


def select_prefactor(N: int = 50):
    """Choose the normalization whose classical asymptotics match the exact sphere formula.

    Returns ``(name, {candidate: relative error})``.
    """
    if N not in _SELECTED:
        from .energy import classical
        sol = solve_z0(classical())
        exact = z_exact_classical(N)
        errs = {k: abs(math.exp(_log_prefactor(k, N, sol) - exact.log) - 1.0) for k in PREFACTORS}
        _SELECTED[N] = (min(errs, key=errs.get), errs)
    return _SELECTED[N]


@dataclass(frozen=True)
class ZEstimate:
    log: float
    sign: float
    N: int
    prefactor: str

    @property
    def value(self):
        return self.sign * math.exp(self.log)


def z_asymptotic(e: EnergyFunction, N: int, sol: SaddleSolution = None,
                 prefactor: str = None) -> ZEstimate:
    """Leading-order log Z_phi(sqrt N) from the saddle point.

    ``prefactor=None`` uses the normalization picked by :func:`select_prefactor`.
    """
    if N < 2:
        raise DomainError("z_asymptotic needs N >= 2")
    sol = sol or solve_z0(e)
    kind = prefactor or select_prefactor()[0]
    return ZEstimate(_log_prefactor(kind, N, sol), 1.0, N, kind)


def _cheb_nodes(n, E):
    k = np.arange(n + 1)
    return 0.5 * E * (1.0 - np.cos(np.pi * k / n))


def z_bruteforce(e: EnergyFunction, N: int, E: float, resolution: int = None,
                 tol: float = 1e-10) -> LogValue:
    """Z_phi(sqrt E) as 2^N times the N-fold self-convolution of ``g(u) = f(sqrt u)/sqrt u``.

    Writing ``Z_k(E) = E^{k/2-1} h_k(E)``, each convolution step becomes a
    Beta-weighted integral of smooth functions, done with Gauss-Jacobi nodes;
    ``h_k`` is tabulated on Chebyshev points of [0, E] for the next step.
    Without ``resolution`` the node count is doubled from 8 until successive
    results agree to ``tol``.
    """
    if not 2 <= N <= 8:
        raise DomainError("z_bruteforce is an oracle for 2 <= N <= 8")
    if not E > 0:
        raise DomainError("E must be positive")
    if resolution is not None:
        return _z_convolution(e, N, float(E), int(resolution))
    prev = None
    n = 8
    while n <= 256:
        cur = _z_convolution(e, N, float(E), n)
        if prev is not None and abs(cur.log - prev.log) < tol:
            return cur
        prev, n = cur, 2 * n
    return cur


def _z_convolution(e, N, E, n):
    G = lambda u: 2.0 * np.asarray(weight_f(e, np.sqrt(u)), dtype=float)  # noqa: E731
    nodes = _cheb_nodes(n, E)
    h = G(nodes)
    for k in range(2, N + 1):
        alpha, beta = 0.5 * (k - 3), -0.5
        x, w = roots_jacobi(n, alpha, beta)
        t = 0.5 * (1.0 + x)
        scale = 2.0 ** (-alpha - beta - 1.0)
        prev = BarycentricInterpolator(nodes, h)
        targets = nodes if k < N else np.array([E])
        new = np.empty(len(targets))
        for m, X in enumerate(targets):
            new[m] = scale * np.sum(w * prev(X * (1.0 - t)) * G(X * t))
        h = new
    val = float(h[-1])
    if not val > 0:
        raise DomainError("convolution produced a non-positive value")
    return LogValue((0.5 * N - 1.0) * math.log(E) + math.log(val))
