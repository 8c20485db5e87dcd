"""Quadrature, monotone root finding and leading-order saddle-point formulas.

Large-parameter results are carried in log domain as :class:`LogValue` so
that factors like ``exp(N * S(z0))`` never overflow for N up to 1e4 and beyond.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import AccuracyError, BracketError, ContractError, DomainError, TruncationError

TWO_PI = 2.0 * math.pi


class LogValue(NamedTuple):
    """A real number stored as ``sign * exp(log)``."""

    log: float
    sign: float = 1.0

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log)

    def ratio(self, other: "LogValue") -> float:
        """``self / other`` evaluated without leaving log domain until the end."""
        return self.sign * other.sign * math.exp(self.log - other.log)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for :func:`integrate_even_line`.

    ``tail_bound`` is the truncation policy: a callable ``Y -> B(Y)`` with
    ``B(Y) >= int_Y^inf |g|``.  When it is ``None`` a sampled decay heuristic
    is used instead.
    """

    relative_tolerance: float = 1e-10
    absolute_tolerance: float = 1e-14
    tail_bound: Optional[Callable[[float], float]] = None
    max_cutoff: float = 2.0 ** 24

    def __post_init__(self):
        if not (self.relative_tolerance > 0 and self.absolute_tolerance > 0):
            raise DomainError("quadrature tolerances must be positive")


DEFAULT_QUADRATURE = QuadratureSpec()


def gaussian_tail_bound(K: float, b: float, z: float) -> Callable[[float], float]:
    """Tail bound for ``exp(-z y^2) f(y)`` when ``f(y) <= K exp(b y^2)`` and ``z > b``."""
    if not z > b:
        raise DomainError(f"tail bound needs z > b (z={z}, b={b})")
    gap = z - b

    def bound(Y):
        return K * math.exp(-gap * Y * Y) / (2.0 * gap * Y)

    return bound


def with_power(bound_factory, rate: float, k: float):
    """Tail bound for ``x^k e^{-rate x}`` from a bound for ``e^{-rate x / 2}``.

    Uses ``x^k e^{-rate x / 2} <= (2k / (e rate))^k``.  ``bound_factory`` maps
    a decay rate to a tail-bound callable.
    """
    if k == 0:
        return bound_factory(rate)
    c = (2.0 * k / (math.e * rate)) ** k
    half = bound_factory(0.5 * rate)
    return lambda Y: (1.0 + c) * half(Y)


def convex_exponential_tail_bound(rate: float, phi, dphi) -> Callable[[float], float]:
    """Tail bound for ``exp(-rate * phi(v))`` with ``phi`` convex and increasing on v > 0.

    Uses ``phi(v) >= phi(V) + phi'(V) (v - V)`` for ``v >= V``.
    """

    def bound(V):
        slope = float(dphi(V))
        if slope <= 0:
            return math.inf
        return math.exp(-rate * float(phi(V))) / (rate * slope)

    return bound


def _find_cutoff(g, spec: QuadratureSpec) -> float:
    target = 0.5 * spec.absolute_tolerance
    Y = 1.0
    if spec.tail_bound is not None:
        while Y <= spec.max_cutoff:
            if spec.tail_bound(Y) < target:
                return Y
            Y *= 2.0
        raise TruncationError(f"tail bound not below {target:.1e} for cutoff <= {spec.max_cutoff}")
    # Heuristic: |g| sampled on [Y, 4Y] times the window length must be negligible.
    while Y <= spec.max_cutoff:
        ys = np.linspace(Y, 4.0 * Y, 64)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            vals = np.abs(np.asarray(g(ys), dtype=float))
        if np.all(np.isfinite(vals)) and vals.max() * 3.0 * Y < 1e-3 * target:
            return Y
        Y *= 2.0
    raise TruncationError("integrand does not decay fast enough to establish a tail bound")


def integrate_even_line(g, spec: QuadratureSpec = DEFAULT_QUADRATURE, even: bool = True,
                        return_error: bool = False):
    """Integrate ``g`` over the real line.

    With ``even=True`` the integrand is assumed even and ``2 * int_0^Y g`` is
    returned; otherwise ``int_{-Y}^{Y} g``.  ``Y`` comes from the truncation
    policy in ``spec``.  ``g`` must accept numpy arrays.
    """
    Y = _find_cutoff(g, spec)
    if even:
        edges = [0.0]
    else:
        edges = [-Y]
    # Geometric breakpoints keep quad's subdivision budget for the bulk.
    pos = [min(Y, 2.0 ** k) for k in range(-2, int(math.log2(Y)) + 1)] + [Y]
    pos = sorted(set(p for p in pos if p > 0))
    if even:
        edges += pos
    else:
        edges = [-p for p in reversed(pos)] + [0.0] + pos

    def scalar(x):
        return float(g(np.asarray(x, dtype=float)))

    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            val, e = integrate.quad(scalar, a, b, epsabs=0.1 * spec.absolute_tolerance,
                                    epsrel=0.1 * spec.relative_tolerance, limit=200)
            total += val
            err += e
    if even:
        total, err = 2.0 * total, 2.0 * err
    if spec.tail_bound is not None:
        err += 2.0 * spec.tail_bound(Y)
    allowed = max(spec.relative_tolerance * abs(total), spec.absolute_tolerance)
    if not np.isfinite(total) or err > allowed:
        raise AccuracyError(f"quadrature error estimate {err:.3e} exceeds {allowed:.3e}")
    return (total, err) if return_error else total


def integrate_interval(g, a: float, b: float, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                       return_error: bool = False):
    """Adaptive quadrature of ``g`` over a finite interval.

    With ``return_error=True`` the pair ``(value, error estimate)`` is returned
    and the tolerance is not enforced; otherwise a missed tolerance raises.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda x: float(g(np.asarray(x, dtype=float))), a, b,
                                  epsabs=0.1 * spec.absolute_tolerance,
                                  epsrel=0.1 * spec.relative_tolerance, limit=400)
    if return_error:
        return val, err
    allowed = max(spec.relative_tolerance * abs(val), spec.absolute_tolerance)
    if not np.isfinite(val) or err > allowed:
        raise AccuracyError(f"quadrature error estimate {err:.3e} exceeds {allowed:.3e}")
    return val


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    bracket: tuple
    evaluations: int


def _expand(lo, hi, positive):
    if positive:
        return lo / 4.0, hi * 4.0
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return mid - 4.0 * half, mid + 4.0 * half


def find_root_increasing(g, seed_bracket=(0.0, 1.0), positive=None, max_expansions=40,
                         monotone_samples=9, full_output=False):
    """Root of a continuous, strictly increasing scalar function.

    The seed bracket is widened by a factor 4 (geometrically when the domain is
    the positive half-line, ``positive=True``, which is the default when the
    seed bracket is positive) until ``g`` changes sign.  The root is then
    polished by Brent's method to an interval width of ``1e-12 * (1 + |root|)``.

    Raises
    ------
    BracketError
        If no sign change appears within ``max_expansions`` widenings.
    ContractError
        If sampled values of ``g`` on the final bracket are not increasing.
    """
    lo, hi = map(float, seed_bracket)
    if not lo < hi:
        raise DomainError("seed bracket must satisfy lo < hi")
    if positive is None:
        positive = lo > 0
    calls = 0

    def G(x):
        nonlocal calls
        calls += 1
        return float(g(x))

    glo, ghi = G(lo), G(hi)
    for _ in range(max_expansions):
        if glo <= 0.0 <= ghi:
            break
        if glo > 0 and ghi > 0:
            lo = _expand(lo, hi, positive)[0]
            glo = G(lo)
        elif glo < 0 and ghi < 0:
            hi = _expand(lo, hi, positive)[1]
            ghi = G(hi)
        else:
            # glo > 0 > ghi: decreasing across the bracket
            raise ContractError("function decreases across the bracket; expected increasing")
    else:
        raise BracketError(f"no sign change found after {max_expansions} expansions "
                           f"(bracket [{lo:.3e}, {hi:.3e}], values {glo:.3e}, {ghi:.3e})")

    if monotone_samples:
        xs = np.linspace(lo, hi, monotone_samples + 2)[1:-1]
        vals = np.array([G(x) for x in xs])
        seq = np.concatenate([[glo], vals, [ghi]])
        slack = 1e-12 * max(1.0, np.abs(seq).max())
        if np.any(np.diff(seq) < -slack):
            raise ContractError("sampled values are not increasing on the bracket")

    if glo == 0.0:
        root = lo
    elif ghi == 0.0:
        root = hi
    else:
        root = optimize.brentq(G, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=500)
    residual = abs(G(root))
    if full_output:
        return RootResult(root=root, residual=residual, bracket=(lo, hi), evaluations=calls)
    return root


@dataclass(frozen=True)
class SaddleInput:
    """Data for the leading-order saddle-point formula ``q * sqrt(2 pi/(lam S'')) e^{lam S}``.

    For the n-dimensional formula set ``hessian_det`` instead of ``Spp_at_z0``.
    """

    lam: float
    S_at_z0: float
    Spp_at_z0: Optional[float] = None
    q_at_z0: float = 1.0
    hessian_det: Optional[float] = None


def saddle_asymptotic_1d(s: SaddleInput, log: bool = False):
    """Leading term of ``int q e^{lam S}`` through a simple real saddle.

    The real-axis orientation is used, which gives the positive branch
    ``sqrt(2 pi / (lam S''))``.  Returns a float, or a :class:`LogValue` when
    ``log=True``.
    """
    if not s.lam > 0:
        raise DomainError("lam must be positive")
    if s.Spp_at_z0 is None or not s.Spp_at_z0 > 0:
        raise ContractError(f"need S''(z0) > 0 for a real saddle, got {s.Spp_at_z0}")
    if s.q_at_z0 == 0:
        raise ContractError("q(z0) = 0: leading term vanishes")
    out = LogValue(math.log(abs(s.q_at_z0)) + 0.5 * math.log(TWO_PI / (s.lam * s.Spp_at_z0))
                   + s.lam * s.S_at_z0, math.copysign(1.0, s.q_at_z0))
    return out if log else out.value


def saddle_asymptotic_nd(s: SaddleInput, n: int, log: bool = False):
    """``(2 pi / lam)^{n/2} |det S''|^{-1/2} e^{lam S} q`` in log domain."""
    if n < 1:
        raise DomainError("dimension must be >= 1")
    if not s.lam > 0:
        raise DomainError("lam must be positive")
    det = s.hessian_det if s.hessian_det is not None else s.Spp_at_z0
    if det is None or det == 0 or not np.isfinite(det):
        raise ContractError("degenerate saddle: Hessian determinant is zero")
    if s.q_at_z0 == 0:
        raise ContractError("q(z0) = 0: leading term vanishes")
    out = LogValue(math.log(abs(s.q_at_z0)) + 0.5 * n * math.log(TWO_PI / s.lam)
                   - 0.5 * math.log(abs(det)) + s.lam * s.S_at_z0,
                   math.copysign(1.0, s.q_at_z0))
    return out if log else out.value
