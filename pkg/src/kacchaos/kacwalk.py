"""The N-particle Kac walk on the energy manifold sum phi(v_i) = N.

A collision picks a uniformly random pair, maps both velocities to the circle
through ``y = sign(v) sqrt(phi(v))``, rotates by a uniform angle and maps back.
Because ``phi(v) = y^2`` the walk is a classical Kac walk in y coordinates, so
the state is stored as y and velocities are recovered on demand.

For a non-constant weight f the uniform rotation leaves arc length on the
y-circle invariant, while the microcanonical measure on that circle carries the
density ``f(y_i) f(y_j)``.  With ``correction="metropolis"`` (the default) a
rotation is accepted with probability ``min(1, f(y_i') f(y_j') / (f(y_i) f(y_j)))``,
which makes the microcanonical measure stationary.  ``correction="none"`` runs
the bare rotation walk.  For the classical energy f is constant and both agree.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .energy import EnergyFunction
from .equilibrium import SaddleSolution, sample_equilibrium_1d
from .errors import DomainError, NumericError
from .numerics import find_root_increasing

TWO_PI = 2.0 * math.pi
REPROJECT_EVERY = 10_000
DRIFT_TOLERANCE = 1e-9
CORRECTIONS = ("metropolis", "none")


def _sign(x):
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def to_y(e: EnergyFunction, v):
    """``sign(v) sqrt(phi(v))`` with sign(0) = +1."""
    v = np.asarray(v, dtype=float)
    return _sign(v) * np.sqrt(e.phi(v))


def from_y(e: EnergyFunction, y):
    """``sign(y) phi^{-1}(y^2)``."""
    y = np.asarray(y, dtype=float)
    return _sign(y) * e.phi_inv(y * y)


def collide(e: EnergyFunction, vi, vj, theta):
    """Post-collision velocities for rotation angle ``theta``.

    Works elementwise on arrays.  ``phi(vi') + phi(vj') == phi(vi) + phi(vj)``
    up to rounding.
    """
    vi, vj = np.asarray(vi, dtype=float), np.asarray(vj, dtype=float)
    if not (np.all(np.isfinite(vi)) and np.all(np.isfinite(vj)) and np.all(np.isfinite(theta))):
        raise DomainError("collide needs finite inputs")
    yi, yj = to_y(e, vi), to_y(e, vj)
    c, s = np.cos(theta), np.sin(theta)
    ni = yi * c + yj * s
    nj = -yi * s + yj * c
    out_i, out_j = from_y(e, ni), from_y(e, nj)
    if np.ndim(out_i) == 0:
        return float(out_i), float(out_j)
    return out_i, out_j


@dataclass(frozen=True)
class CollisionEvent:
    i: int
    j: int
    theta: float
    wait: float
    accepted: bool = True


class MasterVector:
    """State of N particles on the manifold ``sum phi(v_i) = E``.

    Indices are 0-based.  ``total_energy`` is a cache updated incrementally at
    each collision; :meth:`recompute_energy` recomputes it from the velocities.
    """

    def __init__(self, e: EnergyFunction, velocities=None, *, y=None, time=0.0,
                 correction="metropolis"):
        if correction not in CORRECTIONS:
            raise DomainError(f"correction must be one of {CORRECTIONS}")
        if (velocities is None) == (y is None):
            raise DomainError("give exactly one of velocities or y")
        self.energy = e
        self.y = np.array(to_y(e, velocities) if y is None else y, dtype=float)
        if self.y.ndim != 1 or len(self.y) < 2:
            raise DomainError("need a one-dimensional state with N >= 2")
        self.time = float(time)
        self.collision_count = 0
        self.accepted_count = 0
        self.correction = "none" if e.constant_weight is not None else correction
        self.total_energy = float(np.dot(self.y, self.y))
        self.target_energy = self.total_energy

    @property
    def N(self):
        return len(self.y)

    @property
    def velocities(self):
        return from_y(self.energy, self.y)

    def recompute_energy(self):
        return float(np.sum(self.energy.phi(self.velocities)))

    def reproject(self, target=None):
        """Rescale y so that ``sum y^2`` equals ``target`` exactly (to rounding)."""
        target = self.target_energy if target is None else target
        self.y *= math.sqrt(target / float(np.dot(self.y, self.y)))
        self.total_energy = float(np.dot(self.y, self.y))

    def copy(self):
        out = MasterVector(self.energy, y=self.y.copy(), time=self.time, correction=self.correction)
        out.collision_count, out.accepted_count = self.collision_count, self.accepted_count
        out.target_energy = self.target_energy
        return out


def step(state: MasterVector, rng) -> CollisionEvent:
    """One collision: uniform pair, uniform angle on (0, 2 pi], applied in place."""
    N = state.N
    if N < 2:
        raise DomainError("need N >= 2")
    i = int(rng.integers(N))
    j = int(rng.integers(N - 1))
    if j >= i:
        j += 1
    i, j = min(i, j), max(i, j)
    theta = TWO_PI * (1.0 - rng.random())
    wait = rng.exponential(1.0 / N)
    u = rng.random() if state.correction == "metropolis" else 0.0
    accepted = _apply(state, i, j, math.cos(theta), math.sin(theta), u)
    return CollisionEvent(i, j, theta, wait, accepted)


def _apply(state, i, j, c, s, u):
    y = state.y
    yi, yj = y[i], y[j]
    ni = yi * c + yj * s
    nj = -yi * s + yj * c
    state.collision_count += 1
    if state.correction == "metropolis":
        w = state.energy.weight_scalar
        ratio = w(ni) * w(nj) / (w(yi) * w(yj))
        if ratio < 1.0 and u >= ratio:
            return False
    y[i], y[j] = ni, nj
    state.total_energy += (ni * ni + nj * nj) - (yi * yi + yj * yj)
    state.accepted_count += 1
    return True


@dataclass
class RunCounters:
    proposed: int = 0
    accepted: int = 0
    max_pair_residual: float = 0.0
    reprojections: int = 0


def run_collisions(state: MasterVector, count: int, rng, batch: int = 1 << 16,
                   counters: Optional[RunCounters] = None) -> RunCounters:
    """Apply ``count`` collisions without advancing the clock.

    Random numbers are drawn in batches (pair, angle, acceptance uniform) for
    speed, so the trajectory is a pure function of the stream and ``batch``.
    ``max_pair_residual`` tracks ``|h' - h| / (1 + h)`` for each accepted move.
    """
    counters = counters or RunCounters()
    N = state.N
    metro = state.correction == "metropolis"
    w = state.energy.weight_scalar
    y = state.y.tolist()
    wts = [w(x) for x in y] if metro else None
    done = 0
    since = state.collision_count % REPROJECT_EVERY
    max_res = counters.max_pair_residual
    accepted = 0
    energy_delta = 0.0
    reprojected = False
    while done < count:
        B = min(batch, count - done)
        ii = rng.integers(N, size=B)
        jj = rng.integers(N - 1, size=B)
        jj = jj + (jj >= ii)
        theta = TWO_PI * (1.0 - rng.random(B))
        cs, sn = np.cos(theta).tolist(), np.sin(theta).tolist()
        us = rng.random(B).tolist() if metro else None
        ii, jj = ii.tolist(), jj.tolist()
        for k in range(B):
            a, b = ii[k], jj[k]
            yi, yj = y[a], y[b]
            c, s = cs[k], sn[k]
            ni = yi * c + yj * s
            nj = -yi * s + yj * c
            if metro:
                wi, wj = w(ni), w(nj)
                ratio = wi * wj / (wts[a] * wts[b])
                if ratio < 1.0 and us[k] >= ratio:
                    continue
                wts[a], wts[b] = wi, wj
            h = yi * yi + yj * yj
            hn = ni * ni + nj * nj
            res = abs(hn - h) / (1.0 + h)
            if res > max_res:
                max_res = res
            energy_delta += hn - h
            y[a], y[b] = ni, nj
            accepted += 1
        done += B
        # drift control at the cadence of REPROJECT_EVERY collisions
        since += B
        if since >= REPROJECT_EVERY:
            since %= REPROJECT_EVERY
            arr = np.asarray(y)
            tot = float(np.dot(arr, arr))
            if abs(tot - state.target_energy) > DRIFT_TOLERANCE * state.target_energy:
                arr *= math.sqrt(state.target_energy / tot)
                y = arr.tolist()
                if metro:
                    wts = [w(x) for x in y]
                counters.reprojections += 1
                reprojected = True
    state.y[:] = y
    state.collision_count += count
    state.accepted_count += accepted
    if reprojected:
        state.total_energy = float(np.dot(state.y, state.y))
    else:
        state.total_energy += energy_delta
    counters.proposed += count
    counters.accepted += accepted
    counters.max_pair_residual = max_res
    return counters


@dataclass
class Snapshot:
    time: float
    velocities: np.ndarray
    collisions: int = 0
    total_energy: float = 0.0


@dataclass
class TrajectoryStats:
    snapshots: List[Snapshot] = field(default_factory=list)
    summary: list = field(default_factory=list)
    counters: RunCounters = field(default_factory=RunCounters)

    @property
    def collisions(self):
        return self.counters.proposed


def simulate(state: MasterVector, t_end: float, rng, snapshot_times=(),
             on_snapshot=None) -> TrajectoryStats:
    """Run the continuous-time walk until ``t_end``.

    Collisions form a Poisson process of rate N (generator ``N (Q - I)``).  The
    number of events between consecutive snapshot times is drawn as a Poisson
    count, which has the same law as summing exponential waiting times.
    Snapshots are taken at every requested time in ``[state.time, t_end]``.
    """
    if t_end < state.time:
        raise DomainError("t_end must not precede the current time")
    stats = TrajectoryStats()
    times = sorted({float(t) for t in snapshot_times if state.time <= t <= t_end})
    stops = times + ([t_end] if not times or times[-1] < t_end else [])
    want = set(times)
    for t_next in stops:
        dt = t_next - state.time
        if dt > 0:
            run_collisions(state, int(rng.poisson(state.N * dt)), rng, counters=stats.counters)
        state.time = t_next
        if t_next in want:
            snap = Snapshot(t_next, state.velocities, state.collision_count, state.recompute_energy())
            stats.snapshots.append(snap)
            stats.summary.append((t_next, state.collision_count, snap.total_energy))
            if on_snapshot is not None:
                on_snapshot(snap)
    return stats


def rescale_to_manifold(e: EnergyFunction, v, target: float = None) -> np.ndarray:
    """Return ``lam * v`` with ``sum phi(lam v) = target`` (default: N)."""
    v = np.asarray(v, dtype=float)
    target = float(len(v) if target is None else target)
    if not np.any(v != 0):
        raise NumericError("cannot rescale the zero vector")

    def excess(lam):
        return float(np.sum(e.phi(lam * v))) - target

    lam = find_root_increasing(excess, (0.5, 2.0), positive=True, monotone_samples=0)
    return lam * v


def init_from_velocities(e: EnergyFunction, v, correction="metropolis") -> MasterVector:
    """Rescale arbitrary draws onto ``sum phi = N`` and wrap them as a state."""
    v = rescale_to_manifold(e, v)
    state = MasterVector(e, v, correction=correction)
    state.target_energy = float(len(v))
    state.reproject()
    return state


def init_microcanonical(e: EnergyFunction, N: int, sol: SaddleSolution, burn_in: int, rng,
                        correction="metropolis") -> MasterVector:
    """Draw N equilibrium velocities, rescale onto the manifold and burn in.

    The clock and counters are reset after the ``burn_in`` collisions, so the
    returned state starts at time 0.
    """
    if N < 2:
        raise DomainError("need N >= 2")
    if burn_in < 0:
        raise DomainError("burn_in must be non-negative")
    while True:
        v = sample_equilibrium_1d(sol, e, rng, N)
        if np.any(v != 0):
            break
    state = init_from_velocities(e, v, correction)
    if burn_in:
        run_collisions(state, burn_in, rng)
    state.collision_count = state.accepted_count = 0
    state.time = 0.0
    return state


def default_burn_in(N: int) -> int:
    return 100 * N
