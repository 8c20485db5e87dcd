"""Two-dimensional particles with conserved energy and momentum.

N velocities in the plane are constrained by ``sum phi(|v_i|) = 2N`` and
``sum v_i = p``.  The single-particle limit law is ``C2 exp(-z0 phi(|v|))``
where z0 solves

    int_{R^2} (2 - phi(|v|)) exp(-z0 phi(|v|)) dv = 0,

the two momentum multipliers vanishing by evenness of phi.  The partition
function is a three-dimensional saddle integral; its leading term is checked
against the exact Gaussian value for phi = r^2.

Dynamics: a pair move keeps ``s = v_i + v_j`` and ``h = phi(|v_i|) + phi(|v_j|)``.
It draws a direction psi uniformly, puts ``v_i' = s/2 + r u(psi)`` with the
radius r solving the energy constraint, and accepts with a Metropolis ratio of
the weights ``r / |dG/dr|`` (the polar form of the delta-measure on the
constraint curve).  For phi = r^2 the weight is constant and every move is
accepted.
"""

import math
import weakref
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_simpson
from scipy.interpolate import PchipInterpolator

from . import numerics
from .energy import EnergyFunction, get_energy, validate_weight
from .equilibrium import log_sphere_area
from .errors import ContractError, DomainError, NumericError, ValidationError
from .numerics import LogValue, QuadratureSpec, SaddleInput, find_root_increasing

TWO_PI = 2.0 * math.pi
REPROJECT_EVERY = 10_000


@dataclass(frozen=True, eq=False)
class PlanarEnergy:
    """A radial energy ``phi(|v|)`` built on a one-dimensional profile."""

    radial: EnergyFunction
    name: str = ""

    def __post_init__(self):
        if not self.name:
            object.__setattr__(self, "name", self.radial.name)

    def phi(self, v):
        v = np.asarray(v, dtype=float)
        return self.radial.phi(np.hypot(v[..., 0], v[..., 1]))

    def phi_r(self, r):
        return self.radial.phi(np.asarray(r, dtype=float))

    @property
    def quadratic(self) -> Optional[float]:
        """kappa if phi(r) = kappa r^2, else None."""
        return self.radial.meta.get("quadratic")

    def scalar_phi(self):
        f = self.radial.meta.get("scalar_phi")
        return f if f is not None else (lambda r: float(self.radial.phi(np.float64(r))))

    def scalar_dphi(self):
        f = self.radial.meta.get("scalar_dphi")
        return f if f is not None else (lambda r: float(self.radial.dphi(np.float64(r))))


def planar_energy(spec) -> PlanarEnergy:
    if isinstance(spec, PlanarEnergy):
        return spec
    if isinstance(spec, EnergyFunction):
        return PlanarEnergy(spec)
    return PlanarEnergy(get_energy(spec))


@dataclass(frozen=True)
class PlanarSaddle:
    """``z0``, the normalization ``C2`` and the determinant of the exponent's Hessian.

    ``integral_value`` is ``int_{R^2} exp(-z0 phi)``; ``hessian_det`` is
    ``Var(phi) E[v_x^2] E[v_y^2]`` under ``C2 exp(-z0 phi)``.
    """

    name: str
    z0: float
    C2: float
    hessian_det: float
    integral_value: float
    mean_energy: float
    residual: float

    def as_row(self):
        return dict(name=self.name, z0_2d=self.z0, C2=self.C2, hessian_det=self.hessian_det)


def radial_moment(pe: PlanarEnergy, z: float, k: int = 0, power: int = 1,
                  spec: QuadratureSpec = None) -> float:
    """``int_0^inf phi(r)^k r^power exp(-z phi(r)) dr``."""
    spec = spec or QuadratureSpec()
    spec = QuadratureSpec(spec.relative_tolerance, spec.absolute_tolerance)

    def g(r):
        r = np.abs(r)
        p = pe.phi_r(r)
        return p ** k * r ** power * np.exp(-z * p)

    return 0.5 * numerics.integrate_even_line(g, spec)


def _planar_conditions(pe: PlanarEnergy):
    """Sign and growth conditions on the radial weight ``r / phi'(r)`` in ``u = phi``.

    With ``u = y^2`` the planar measure ``r dr`` becomes ``F(y) dy`` with
    ``F(y) = 2 |y| r / phi'(r)``; the saddle equation needs
    ``int (2 - y^2) F`` positive on ``|y| <= sqrt 2`` and negative overall.
    """
    e = pe.radial

    def F(y):
        y = np.maximum(np.abs(np.asarray(y, dtype=float)), 1e-6)
        r = e.phi_inv(y * y)
        return 2.0 * y * r / np.asarray(e.dphi(r), dtype=float)

    # rescale y -> sqrt(2) y so the unit conditions read as in one dimension
    res = validate_weight(lambda y: F(math.sqrt(2.0) * np.asarray(y)), name=pe.name)
    return res


def solve_z0_2d(pe, spec: QuadratureSpec = None) -> PlanarSaddle:
    """Solve ``int (2 - phi) exp(-z phi) d^2v = 0`` for z0 > 0."""
    pe = planar_energy(pe)
    cond = _planar_conditions(pe)
    if not (cond["bound_ok"] and cond["full_ok"] and cond["unit_ok"]):
        raise ValidationError(f"planar energy {pe.name!r} fails the saddle conditions", cond)

    def B(z):
        # e^{2z} int (2 - phi) e^{-z phi}: derivative is a positive integral
        return math.exp(2.0 * z) * (2.0 * radial_moment(pe, z, 0, spec=spec)
                                    - radial_moment(pe, z, 1, spec=spec))

    z0 = find_root_increasing(B, (1e-2, 1.0), positive=True)
    R0 = radial_moment(pe, z0, 0, spec=spec)
    R1 = radial_moment(pe, z0, 1, spec=spec)
    R2 = radial_moment(pe, z0, 2, spec=spec)
    Rr2 = radial_moment(pe, z0, 0, power=3, spec=spec)
    var_phi = R2 / R0 - (R1 / R0) ** 2
    second = 0.5 * Rr2 / R0  # E[v_x^2] = E[r^2] / 2
    return PlanarSaddle(name=pe.name, z0=z0, C2=1.0 / (TWO_PI * R0),
                        hessian_det=var_phi * second * second, integral_value=TWO_PI * R0,
                        mean_energy=R1 / R0, residual=(2.0 * R0 - R1) / R0)


def z_asymptotic_2d(pe, N: int, p=(0.0, 0.0), sad: PlanarSaddle = None) -> LogValue:
    """Leading-order log Z(N, p) for fixed p.

    ``e^{2 N z0} (int e^{-z0 phi})^N (2 pi / N)^{3/2} det^{-1/2} / (2 pi)^3``;
    p enters only through ``q = 1`` at the saddle.
    """
    if N < 2:
        raise DomainError("need N >= 2")
    pe = planar_energy(pe)
    sad = sad or solve_z0_2d(pe)
    lead = numerics.saddle_asymptotic_nd(SaddleInput(N, 0.0, hessian_det=sad.hessian_det), 3,
                                         log=True)
    return LogValue(2.0 * N * sad.z0 + N * math.log(sad.integral_value) + lead.log
                    - 3.0 * math.log(TWO_PI))


def z_exact_planar_classical(N: int, p=(0.0, 0.0)) -> LogValue:
    """Exact Z for phi = r^2: a (2N-3)-sphere of radius sqrt(2N - |p|^2/N), divided by N."""
    if N < 2:
        raise DomainError("need N >= 2")
    R2 = 2.0 * N - float(np.dot(p, p)) / N
    if R2 <= 0:
        raise DomainError("momentum too large for the energy shell")
    R = math.sqrt(R2)
    return LogValue(log_sphere_area(2 * N - 2, R) - math.log(2.0 * R) - math.log(N))


# -- pair move ---------------------------------------------------------------

class _PairKernel:
    """Scalar radius solve and Metropolis weight for one energy."""

    def __init__(self, pe: PlanarEnergy):
        self.pe = pe
        self.kappa = pe.quadratic
        self.phi = pe.scalar_phi()
        self.dphi = pe.scalar_dphi()
        self.phi_inv = lambda u: float(pe.radial.phi_inv(np.float64(u)))

    def G(self, cx, cy, ux, uy, r):
        """``G(r)`` and ``G'(r)`` for ``phi(|c + r u|) + phi(|c - r u|)``."""
        ax, ay = cx + r * ux, cy + r * uy
        bx, by = cx - r * ux, cy - r * uy
        na, nb = math.hypot(ax, ay), math.hypot(bx, by)
        g = self.phi(na) + self.phi(nb)
        da = self.dphi(na) * (ax * ux + ay * uy) / na if na > 0 else 0.0
        db = self.dphi(nb) * (bx * ux + by * uy) / nb if nb > 0 else 0.0
        return g, da - db

    def radius(self, cx, cy, ux, uy, h):
        if self.kappa is not None:
            r2 = h / (2.0 * self.kappa) - (cx * cx + cy * cy)
            if r2 < -1e-12 * (1.0 + h):
                raise ContractError("no admissible radius: h below 2 phi(|s/2|)")
            return math.sqrt(max(r2, 0.0))
        g0, _ = self.G(cx, cy, ux, uy, 0.0)
        if h < g0 - 1e-12 * (1.0 + h):
            raise ContractError("no admissible radius: h below 2 phi(|s/2|)")
        if h <= g0:
            return 0.0
        # G(r) >= 2 phi(r), so phi^{-1}(h/2) is an upper bound; Newton from
        # above is monotone for a convex increasing G.
        hi = self.phi_inv(0.5 * h)
        lo = 0.0
        r = hi
        tol = 1e-14 * (1.0 + h)
        for _ in range(100):
            g, dg = self.G(cx, cy, ux, uy, r)
            f = g - h
            if abs(f) <= tol:
                return r
            if f > 0:
                hi = r
            else:
                lo = r
            step = f / dg if dg > 0 else math.inf
            nr = r - step
            if not (lo < nr < hi):
                nr = 0.5 * (lo + hi)
            if hi - lo <= 1e-15 * (1.0 + hi):
                return r
            r = nr
        raise NumericError("radius solve did not converge")

    def weight(self, cx, cy, ux, uy, r, h):
        """``r / G'(r)``; the r -> 0 limit is taken by evaluating slightly off zero."""
        if self.kappa is not None:
            return 0.25 / self.kappa
        scale = 1e-7 * (1.0 + math.hypot(cx, cy))
        re = max(r, scale)
        _, dg = self.G(cx, cy, ux, uy, re)
        return re / dg


_KERNELS = weakref.WeakKeyDictionary()


def _kernel(pe):
    k = _KERNELS.get(pe)
    if k is None:
        k = _KERNELS[pe] = _PairKernel(pe)
    return k


def planar_collide(pe, vi, vj, rng, psi: float = None, u: float = None):
    """One Metropolis pair move.  Returns ``(vi', vj', accepted)``.

    ``psi`` and the acceptance uniform ``u`` are drawn from ``rng`` unless given.
    """
    pe = planar_energy(pe)
    vi = np.asarray(vi, dtype=float)
    vj = np.asarray(vj, dtype=float)
    if not (np.all(np.isfinite(vi)) and np.all(np.isfinite(vj))):
        raise DomainError("planar_collide needs finite inputs")
    k = _kernel(pe)
    if psi is None:
        psi = TWO_PI * rng.random()
    if u is None and k.kappa is None:
        u = rng.random()
    out = _move(k, float(vi[0]), float(vi[1]), float(vj[0]), float(vj[1]), math.cos(psi),
                math.sin(psi), u)
    if out is None:
        return vi.copy(), vj.copy(), False
    ax, ay, bx, by = out
    return np.array([ax, ay]), np.array([bx, by]), True


def _move(k, aix, aiy, ajx, ajy, ux, uy, u, metro=True):
    cx, cy = 0.5 * (aix + ajx), 0.5 * (aiy + ajy)
    h = k.phi(math.hypot(aix, aiy)) + k.phi(math.hypot(ajx, ajy))
    r = k.radius(cx, cy, ux, uy, h)
    if metro and k.kappa is None:
        wx, wy = aix - cx, aiy - cy
        rc = math.hypot(wx, wy)
        if rc > 0:
            w_cur = k.weight(cx, cy, wx / rc, wy / rc, rc, h)
        else:
            w_cur = k.weight(cx, cy, ux, uy, 0.0, h)
        w_new = k.weight(cx, cy, ux, uy, r, h)
        ratio = w_new / w_cur
        if ratio < 1.0 and u >= ratio:
            return None
    # vj' = s - vi' keeps the pair momentum to rounding
    nix, niy = cx + r * ux, cy + r * uy
    return nix, niy, (aix + ajx) - nix, (aiy + ajy) - niy


# -- state, projection and sampler -------------------------------------------

@dataclass
class PlanarState:
    velocities: np.ndarray
    target_energy: float
    target_momentum: np.ndarray
    time: float = 0.0
    collision_count: int = 0
    accepted_count: int = 0
    reprojections: int = 0

    @property
    def N(self):
        return len(self.velocities)

    def total_energy(self, pe) -> float:
        return float(np.sum(planar_energy(pe).phi(self.velocities)))

    @property
    def total_momentum(self):
        return self.velocities.sum(axis=0)


def project_to_manifold(pe, V, p, E=None, iterations: int = 50, tol: float = 1e-10):
    """Alternate an exact momentum shift and a rescale about ``p/N`` until both constraints hold.

    Scaling the deviations from the mean keeps the momentum, and
    ``lam -> sum phi(|p/N + lam w|)`` is non-decreasing, so the energy is
    matched by a monotone root solve.
    """
    pe = planar_energy(pe)
    V = np.array(V, dtype=float)
    N = len(V)
    p = np.asarray(p, dtype=float)
    E = 2.0 * N if E is None else float(E)
    for _ in range(iterations):
        V += (p - V.sum(axis=0)) / N
        c = p / N
        W = V - c
        if not np.any(W != 0):
            raise NumericError("degenerate configuration: all velocities equal")
        if float(np.sum(pe.phi(np.broadcast_to(c, V.shape)))) >= E:
            raise NumericError("momentum too large for the energy shell")

        def excess(lam):
            return float(np.sum(pe.phi(c + lam * W))) - E

        lam = find_root_increasing(excess, (0.5, 2.0), positive=True, monotone_samples=0)
        V = c + lam * W
        e_err = abs(float(np.sum(pe.phi(V))) - E) / N
        p_err = np.max(np.abs(V.sum(axis=0) - p)) / (1.0 + np.linalg.norm(p))
        if e_err <= tol and p_err <= tol:
            return V
    raise NumericError("joint momentum/energy projection did not converge")


class PlanarLaw:
    """Component and radial marginals of ``C2 exp(-z0 phi(|v|))``, tabulated."""

    def __init__(self, pe: PlanarEnergy, sad: PlanarSaddle, n: int = 2001):
        self.pe, self.sad = pe, sad
        rmax = float(pe.radial.phi_inv(np.float64(40.0 / sad.z0)))
        # radial CDF: 2 pi C2 int_0^R r e^{-z0 phi(r)} dr
        r = np.linspace(0.0, rmax, 4 * n + 1)
        dens = TWO_PI * sad.C2 * r * np.exp(-sad.z0 * pe.phi_r(r))
        F = cumulative_simpson(dens, x=r, initial=0.0)
        self._check(F[-1], "radial")
        self._radial = PchipInterpolator(r, np.clip(F / F[-1], 0.0, 1.0), extrapolate=False)
        self.rmax = rmax
        # component density: 2 C2 int_0^inf e^{-z0 phi(sqrt(x^2 + y^2))} dy, trapezoid in y
        x = np.linspace(0.0, rmax, n)
        y = np.linspace(0.0, rmax, 2 * n + 1)
        dy = y[1] - y[0]
        X, Y = np.meshgrid(x, y, indexing="ij")
        vals = np.exp(-sad.z0 * pe.phi_r(np.hypot(X, Y)))
        g = 2.0 * sad.C2 * dy * (vals.sum(axis=1) - 0.5 * vals[:, 0] - 0.5 * vals[:, -1])
        half = cumulative_simpson(g, x=x, initial=0.0)
        self._check(2.0 * half[-1], "component")
        self._component = PchipInterpolator(x, np.clip(half / half[-1] * 0.5, 0.0, 0.5),
                                             extrapolate=False)

    @staticmethod
    def _check(total, what):
        if abs(total - 1.0) > 1e-6:
            raise NumericError(f"{what} marginal integrates to {total:.9f}, expected 1")

    def radial_cdf(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r >= self.rmax, 1.0, np.nan_to_num(self._radial(np.clip(r, 0.0, None))))

    def component_cdf(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        half = np.where(a >= self.rmax, 0.5, np.nan_to_num(self._component(np.minimum(a, self.rmax))))
        return 0.5 + np.sign(x) * half


@dataclass
class PlanarRun:
    state: PlanarState
    component: "object"
    radial: "object"
    proposals: int
    accepted: int
    max_energy_residual: float
    max_momentum_residual: float
    pooled: int
    mean_components: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def acceptance_ratio(self):
        return self.accepted / self.proposals if self.proposals else 1.0


def sample_from_saddle(pe: PlanarEnergy, sad: PlanarSaddle, N: int, rng) -> np.ndarray:
    """N i.i.d. draws from ``C2 exp(-z0 phi(|v|))``: inverse radial CDF and uniform angle."""
    law = PlanarLaw(pe, sad)
    grid = np.linspace(0.0, law.rmax, 20001)
    F = law.radial_cdf(grid)
    keep = np.concatenate([[True], np.diff(F) > 0])
    r = np.interp(rng.random(N), F[keep], grid[keep])
    ang = TWO_PI * rng.random(N)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def init_planar(pe, N: int, p, sad: PlanarSaddle, rng) -> PlanarState:
    pe = planar_energy(pe)
    if N < 2:
        raise DomainError("need N >= 2")
    p = np.asarray(p, dtype=float)
    V = project_to_manifold(pe, sample_from_saddle(pe, sad, N, rng), p)
    return PlanarState(V, 2.0 * N, p.copy())


def run_planar(pe, state: PlanarState, steps: int, rng, on_sweep=None, sweep: int = None,
               batch: int = 1 << 15, correction: str = "metropolis"):
    """Apply ``steps`` pair moves in place.  Returns (max energy residual, max momentum residual).

    ``correction="none"`` skips the Metropolis test (uniform-psi moves only).

    ``on_sweep(state)`` is called every ``sweep`` moves.  The joint projection
    is re-applied every ``REPROJECT_EVERY`` moves if rounding drift exceeds 1e-12.
    """
    pe = planar_energy(pe)
    k = _kernel(pe)
    N = state.N
    V = state.velocities
    vx, vy = V[:, 0].tolist(), V[:, 1].tolist()
    if correction not in ("metropolis", "none"):
        raise DomainError("correction must be metropolis or none")
    metro = k.kappa is None and correction == "metropolis"
    max_e = max_p = 0.0
    done = 0
    accepted = 0
    since = state.collision_count % REPROJECT_EVERY
    sweep = sweep or steps + 1
    next_sweep = sweep
    while done < steps:
        B = min(batch, steps - done, next_sweep - done)
        ii = rng.integers(N, size=B)
        jj = rng.integers(N - 1, size=B)
        jj = (jj + (jj >= ii)).tolist()
        ii = ii.tolist()
        psi = TWO_PI * rng.random(B)
        cs, sn = np.cos(psi).tolist(), np.sin(psi).tolist()
        us = rng.random(B).tolist() if metro else [0.0] * B
        phi = k.phi
        for n in range(B):
            a, b = ii[n], jj[n]
            out = _move(k, vx[a], vy[a], vx[b], vy[b], cs[n], sn[n], us[n], metro)
            if out is None:
                continue
            h = phi(math.hypot(vx[a], vy[a])) + phi(math.hypot(vx[b], vy[b]))
            sx, sy = vx[a] + vx[b], vy[a] + vy[b]
            vx[a], vy[a], vx[b], vy[b] = out
            hn = phi(math.hypot(vx[a], vy[a])) + phi(math.hypot(vx[b], vy[b]))
            max_e = max(max_e, abs(hn - h) / (1.0 + h))
            max_p = max(max_p, (abs(vx[a] + vx[b] - sx) + abs(vy[a] + vy[b] - sy))
                        / (1.0 + math.hypot(sx, sy)))
            accepted += 1
        done += B
        since += B
        if since >= REPROJECT_EVERY:
            since %= REPROJECT_EVERY
            W = np.column_stack([vx, vy])
            e_err = abs(float(np.sum(pe.phi(W))) - state.target_energy) / N
            p_err = float(np.max(np.abs(W.sum(axis=0) - state.target_momentum)))
            if e_err > 1e-12 or p_err > 1e-12 * (1.0 + np.linalg.norm(state.target_momentum)):
                W = project_to_manifold(pe, W, state.target_momentum, state.target_energy)
                vx, vy = W[:, 0].tolist(), W[:, 1].tolist()
                state.reprojections += 1
        if done == next_sweep:
            next_sweep += sweep
            state.velocities = np.column_stack([vx, vy])
            if on_sweep is not None:
                on_sweep(state)
    state.velocities = np.column_stack([vx, vy])
    state.collision_count += steps
    state.accepted_count += accepted
    return max_e, max_p


def sample_planar(pe, N: int, p, sad: PlanarSaddle, steps: int, rng, pool: int = 100_000,
                  burn_in_fraction: float = 0.1, ks_threshold: float = 0.02,
                  on_snapshot=None, correction: str = "metropolis", init=None) -> PlanarRun:
    """Initialize on the manifold, run ``steps`` moves and test the pooled marginals.

    After ``burn_in_fraction * steps`` moves, snapshots are taken at equal
    spacing until about ``pool`` velocity components (both axes pooled) are
    collected.  The component and radial KS distances are computed against
    the tabulated ``C2 exp(-z0 phi)`` marginals.  ``init`` replaces the
    i.i.d. starting draws (it is projected onto the manifold first).
    """
    from .chaos import DistanceReport, ks_distance

    pe = planar_energy(pe)
    p = np.asarray(p, dtype=float)
    if init is None:
        state = init_planar(pe, N, p, sad, rng)
    else:
        state = PlanarState(project_to_manifold(pe, init, p), 2.0 * N, p.copy())
    burn = int(burn_in_fraction * steps)
    n_snap = max(1, int(math.ceil(pool / (2 * N))))
    spacing = max(1, (steps - burn) // n_snap)
    max_e, max_p = run_planar(pe, state, burn, rng, correction=correction)
    snaps = []

    def grab(st):
        snaps.append(st.velocities.copy())
        if on_snapshot is not None:
            on_snapshot(st, len(snaps) - 1)

    e2, p2 = run_planar(pe, state, steps - burn, rng, on_sweep=grab, sweep=spacing,
                        correction=correction)
    snaps = snaps[-n_snap:]
    law = PlanarLaw(pe, sad)
    comps = np.concatenate([s.ravel() for s in snaps]) if snaps else state.velocities.ravel()
    radii = np.concatenate([np.hypot(s[:, 0], s[:, 1]) for s in snaps]) if snaps else \
        np.hypot(*state.velocities.T)
    ks_c = ks_distance(comps, law.component_cdf)
    ks_r = ks_distance(radii, law.radial_cdf)
    allv = np.concatenate(snaps) if snaps else state.velocities
    return PlanarRun(
        state=state,
        component=DistanceReport(ks_c, math.nan, (len(comps),), ks_c < ks_threshold),
        radial=DistanceReport(ks_r, math.nan, (len(radii),), ks_r < ks_threshold),
        proposals=steps, accepted=state.accepted_count,
        max_energy_residual=max(max_e, e2), max_momentum_residual=max(max_p, p2),
        pooled=len(comps), mean_components=tuple(allv.mean(axis=0)),
        diagnostics=dict(component_std=tuple(allv.std(axis=0)), snapshots=len(snaps),
                         stationarity_p=float(stats.ks_2samp(snaps[0].ravel(), snaps[-1].ravel()).pvalue)
                         if len(snaps) > 1 else 1.0),
    )
