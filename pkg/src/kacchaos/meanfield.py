"""Stochastic particle solver for the mean-field Boltzmann-Kac equation.

An ensemble of M particles stands for the one-particle law f(v, t).  In a
step of length dt, ``Poisson(M * rate * dt / 2)`` disjoint random pairs collide
with the same pair rule as the N-particle walk, so every particle collides at
rate ``rate_constant`` and each event conserves the pair energy exactly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyFunction, weight_f
from .equilibrium import SaddleSolution, sample_equilibrium_1d
from .errors import DomainError
from .kacwalk import CORRECTIONS, TWO_PI, Snapshot, from_y, to_y

DEFAULT_RATE = 2.0


@dataclass
class MeanFieldEnsemble:
    particles: np.ndarray
    energy: EnergyFunction
    time: float = 0.0
    rate_constant: float = DEFAULT_RATE
    correction: str = "metropolis"
    collisions: int = 0
    snapshots: list = field(default_factory=list)

    def __post_init__(self):
        self.particles = np.array(self.particles, dtype=float)
        if self.particles.ndim != 1 or len(self.particles) < 2:
            raise DomainError("ensemble needs M >= 2 particles")
        if self.correction not in CORRECTIONS:
            raise DomainError(f"correction must be one of {CORRECTIONS}")
        if self.energy.constant_weight is not None:
            self.correction = "none"

    @property
    def M(self):
        return len(self.particles)

    def total_energy(self):
        return float(np.sum(self.energy.phi(self.particles)))


def mf_step(ens: MeanFieldEnsemble, dt: float, rng) -> int:
    """Advance by ``dt``; returns the number of pair events drawn."""
    if dt < 0:
        raise DomainError("dt must be non-negative")
    if dt > 0.1 / ens.rate_constant * (1 + 1e-12):
        raise DomainError(f"dt={dt} exceeds the stability limit 0.1/rate_constant")
    if dt == 0:
        return 0
    M = ens.M
    K = min(int(rng.poisson(M * ens.rate_constant * dt / 2.0)), M // 2)
    if K:
        idx = rng.permutation(M)[: 2 * K]
        a, b = idx[:K], idx[K:]
        e = ens.energy
        yi, yj = to_y(e, ens.particles[a]), to_y(e, ens.particles[b])
        theta = TWO_PI * (1.0 - rng.random(K))
        c, s = np.cos(theta), np.sin(theta)
        ni, nj = yi * c + yj * s, -yi * s + yj * c
        if ens.correction == "metropolis":
            ratio = (weight_f(e, ni) * weight_f(e, nj)) / (weight_f(e, yi) * weight_f(e, yj))
            keep = rng.random(K) < ratio
            a, b, ni, nj = a[keep], b[keep], ni[keep], nj[keep]
        ens.particles[a] = from_y(e, ni)
        ens.particles[b] = from_y(e, nj)
    ens.collisions += K
    ens.time += dt
    return K


def mf_solve(e: EnergyFunction, f0_sampler, M: int, t_end: float, rng, dt: float = 0.01,
             rate_constant: float = DEFAULT_RATE, snapshot_times=(),
             correction: str = "metropolis") -> MeanFieldEnsemble:
    """Draw M i.i.d. particles from ``f0_sampler(rng, M)`` and evolve them to ``t_end``.

    The step is shrunk to ``t_end / ceil(t_end / dt)`` so that the run ends
    exactly at ``t_end``; snapshots are recorded at the step nearest to each
    requested time.
    """
    if t_end < 0:
        raise DomainError("t_end must be non-negative")
    ens = MeanFieldEnsemble(f0_sampler(rng, M), e, rate_constant=rate_constant,
                            correction=correction)
    n = int(math.ceil(t_end / dt - 1e-12)) if t_end > 0 else 0
    h = t_end / n if n else 0.0
    marks = {}
    for t in snapshot_times:
        if 0 <= t <= t_end:
            marks.setdefault(int(round(t / h)) if h else 0, []).append(float(t))
    for k in range(n + 1):
        for t in marks.get(k, ()):
            ens.snapshots.append(Snapshot(t, ens.particles.copy(), ens.collisions,
                                             ens.total_energy()))
        if k < n:
            mf_step(ens, h, rng)
    ens.time = float(t_end)
    return ens


# -- initial laws ------------------------------------------------------------

def uniform_sampler(half_width: float = math.sqrt(3.0)):
    """Uniform on [-a, a]; the default has unit second moment."""
    return lambda rng, size: rng.uniform(-half_width, half_width, size)


def normal_sampler(scale: float = 1.0):
    return lambda rng, size: scale * rng.standard_normal(size)


def equilibrium_sampler(sol: SaddleSolution, e: EnergyFunction):
    return lambda rng, size: sample_equilibrium_1d(sol, e, rng, size)
