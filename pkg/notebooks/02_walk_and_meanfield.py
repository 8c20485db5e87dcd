# %% [markdown]
# # The walk, its equilibrium and the mean-field limit
#
# We run the relativistic walk from equilibrium draws, compare the pooled
# one-particle marginal with ``C exp(-z0 phi)``, and then watch a uniform
# start relax under both the walk and the mean-field ensemble.

# %%
from pathlib import Path

import numpy as np

from kacchaos import chaos, energy, equilibrium, io, kacwalk, meanfield

OUT = Path(__file__).with_name("figures")
rng = np.random.default_rng(7)
rel = energy.relativistic()
sol = equilibrium.solve_z0(rel)
law = equilibrium.equilibrium_law(sol, rel)

# %%
N = 500
state = kacwalk.init_microcanonical(rel, N, sol, 100 * N, rng)
pool = []
for _ in range(100):
    kacwalk.run_collisions(state, N, rng)
    pool.append(state.velocities)
x = np.concatenate(pool)
print("KS to equilibrium:", round(chaos.ks_distance(x, law.cdf), 4))
print("acceptance:", round(state.accepted_count / state.collision_count, 3))

# %%
io.write_text(OUT / "walk_marginal.svg",
              io.histogram_overlay(x, law.pdf, title="relativistic walk, N=500"))

# %% [markdown]
# Without the Metropolis step the rotation walk keeps the energy but
# equilibrates to the wrong law when the weight f is not constant.

# %%
bare = kacwalk.init_microcanonical(rel, N, sol, 100 * N, rng, correction="none")
pool = []
for _ in range(100):
    kacwalk.run_collisions(bare, N, rng)
    pool.append(bare.velocities)
print("uncorrected KS:", round(chaos.ks_distance(np.concatenate(pool), law.cdf), 4))

# %% [markdown]
# Propagation of chaos: a uniform start, evolved to t=1 with the walk for
# growing N, approaches the mean-field ensemble at the same time.

# %%
cl = energy.classical()
report = chaos.propagation_test(cl, meanfield.uniform_sampler(), [20, 80, 320], 1.0,
                                chaos.Budget(mf_particles=20_000), rng)
Ns, w1, se = report.series("w1")
for n, v, s in zip(Ns, w1, se):
    print(f"N={n:4d} W1={v:.4f} +- {s:.4f}")
io.write_text(OUT / "propagation.svg", io.line_chart({"W1": (Ns, w1, se)}, xlabel="N",
                                                      ylabel="W1", logx=True))
